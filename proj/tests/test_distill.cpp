#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "grpolab/distill.hpp"
#include "grpolab/grpo.hpp"

using namespace grpolab;

namespace {

Vec dist(std::initializer_list<double> v) {
  Vec p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

Vec random_dist(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vec p(n);
  for (int i = 0; i < n; ++i) p[i] = u(rng);
  return p / p.sum();
}

double brute_force_kl(const Vec& p, const Vec& q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) kl += p[i] * std::log(p[i] / q[i]);
  return kl;
}

}  // namespace

TEST_CASE("token KL closed-form examples") {
  const Vec teacher = dist({0.75, 0.25});
  const Vec student = dist({0.5, 0.5});
  CHECK(token_kl(teacher, student, KlDirection::teacher_to_student, std::nullopt) ==
        doctest::Approx(0.130812).epsilon(1e-5));
  CHECK(token_kl(teacher, teacher, KlDirection::teacher_to_student, std::nullopt) == 0.0);
  CHECK(token_kl(teacher, student, KlDirection::student_to_teacher, std::nullopt) ==
        doctest::Approx(brute_force_kl(student, teacher)).epsilon(1e-12));
}

TEST_CASE("non-normalized inputs are rejected") {
  CHECK_THROWS_AS(token_kl(dist({0.7, 0.7}), dist({0.5, 0.5}),
                           KlDirection::teacher_to_student, std::nullopt),
                  std::invalid_argument);
}

TEST_CASE("full-vocabulary KL matches brute force") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 2 + static_cast<int>(rng() % 30);
    const Vec p = random_dist(rng, n);
    const Vec q = random_dist(rng, n);
    const double kl = token_kl(p, q, KlDirection::teacher_to_student, std::nullopt);
    CHECK(std::abs(kl - brute_force_kl(p, q)) <= 1e-12);
    CHECK(kl >= 0.0);
  }
}

TEST_CASE("top-k covering the vocabulary is lossless") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 3 + static_cast<int>(rng() % 10);
    const Vec p = random_dist(rng, n);
    const Vec q = random_dist(rng, n);
    const double exact = token_kl(p, q, KlDirection::teacher_to_student, std::nullopt);
    const double topk = token_kl(p, q, KlDirection::teacher_to_student, n);
    CHECK(topk == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("truncated top-k lumps the tail") {
  const Vec p = dist({0.6, 0.3, 0.08, 0.02});
  const Vec q = dist({0.25, 0.25, 0.25, 0.25});
  // manual: two head terms plus the lumped 0.1-vs-0.5 tail bucket
  const double expect = 0.6 * std::log(0.6 / 0.25) + 0.3 * std::log(0.3 / 0.25) +
                        0.1 * std::log(0.1 / 0.5);
  CHECK(token_kl(p, q, KlDirection::teacher_to_student, 2) ==
        doctest::Approx(expect).epsilon(1e-12));
}

namespace {

// two-step trajectory whose assistant tokens live at distinct student and
// teacher context keys of the given policy
Trajectory hinted_trajectory(const TabularPolicy& policy, int actions) {
  Trajectory traj;
  for (int t = 0; t < actions; ++t) {
    TokenRecord tok;
    tok.role_flag = 1;
    tok.step_index = t;
    tok.token_id = t % policy.vocab();
    tok.context = "hinted" + std::to_string(t % 2);
    tok.teacher_context = tok.context;
    tok.hint_free_context = "plain" + std::to_string(t % 2);
    tok.logp_current = policy.log_prob(tok.context, tok.token_id);
    tok.logp_old = tok.logp_current;
    tok.logp_ref = tok.logp_current;
    traj.tokens.push_back(tok);

    TokenRecord echo;
    echo.role_flag = 0;
    echo.step_index = t;
    traj.tokens.push_back(echo);
  }
  return traj;
}

TabularPolicy two_key_policy() {
  TabularPolicy policy(3);
  policy.row("hinted0") << 1.2, -0.3, 0.1;
  policy.row("hinted1") << 0.4, 0.9, -1.0;
  policy.row("plain0") << 0.0, 0.0, 0.0;
  policy.row("plain1") << -0.5, 0.2, 0.7;
  return policy;
}

}  // namespace

TEST_CASE("masked aggregation modes") {
  const TabularPolicy policy = two_key_policy();
  const Trajectory traj = hinted_trajectory(policy, 2);
  KlConfig cfg;
  cfg.direction = KlDirection::teacher_to_student;

  cfg.aggregation = KlAggregation::masked_sum;
  const double sum = std::get<double>(masked_kl(traj, policy, cfg));
  const double k0 = token_kl(policy.probs("hinted0"), policy.probs("plain0"),
                             cfg.direction, std::nullopt);
  const double k1 = token_kl(policy.probs("hinted1"), policy.probs("plain1"),
                             cfg.direction, std::nullopt);
  CHECK(sum == doctest::Approx(k0 + k1).epsilon(1e-12));

  cfg.aggregation = KlAggregation::masked_mean;
  CHECK(std::get<double>(masked_kl(traj, policy, cfg)) ==
        doctest::Approx((k0 + k1) / 2.0).epsilon(1e-12));

  cfg.aggregation = KlAggregation::per_token_in_advantage;
  const Vec per = std::get<Vec>(masked_kl(traj, policy, cfg));
  REQUIRE(per.size() == 4);
  CHECK(per[0] == doctest::Approx(k0).epsilon(1e-12));
  CHECK(per[1] == 0.0);  // echo token
  CHECK(per[2] == doctest::Approx(k1).epsilon(1e-12));
}

TEST_CASE("token duplication doubles masked_sum and fixes masked_mean") {
  const TabularPolicy policy = two_key_policy();
  const Trajectory traj = hinted_trajectory(policy, 2);
  Trajectory doubled = hinted_trajectory(policy, 2);
  for (const TokenRecord& tok : traj.tokens) doubled.tokens.push_back(tok);
  for (std::size_t t = 4; t < doubled.tokens.size(); ++t) {
    doubled.tokens[t].step_index += 2;
  }
  KlConfig cfg;
  cfg.direction = KlDirection::teacher_to_student;
  cfg.aggregation = KlAggregation::masked_sum;
  const double base = std::get<double>(masked_kl(traj, policy, cfg));
  CHECK(std::get<double>(masked_kl(doubled, policy, cfg)) ==
        doctest::Approx(2.0 * base).epsilon(1e-12));
  cfg.aggregation = KlAggregation::masked_mean;
  const double mean = std::get<double>(masked_kl(traj, policy, cfg));
  CHECK(std::get<double>(masked_kl(doubled, policy, cfg)) ==
        doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("reward shaping arithmetic") {
  CHECK(shape_reward_opsd(1.0, 10.0, 0.02) == doctest::Approx(0.8));
  CHECK(shape_reward_opsd(0.7, 3.0, 0.0) == 0.7);
  CHECK(shape_reward_pidistill(0.5, 5.0, 0.01) == doctest::Approx(0.45));
  CHECK(shape_reward_pidistill(0.0, 4.0, 0.02) < 0.0);
  CHECK_THROWS_AS(shape_reward_opsd(1.0, 1.0, -0.1), std::invalid_argument);
}

TEST_CASE("shaping shift-invariance of group advantages") {
  Vec rewards(4);
  rewards << 1.0, 0.5, 0.0, 0.5;
  const Vec base = group_advantages(rewards, 1e-8);
  // same KL penalty on every member shifts rewards uniformly
  Vec shaped(4);
  for (int i = 0; i < 4; ++i) shaped[i] = shape_reward_opsd(rewards[i], 7.3, 0.02);
  const Vec after = group_advantages(shaped, 1e-8);
  for (int i = 0; i < 4; ++i) CHECK(after[i] == doctest::Approx(base[i]).epsilon(1e-9));
}

TEST_CASE("batch expansion splits ratio sources and loss weights") {
  const TabularPolicy policy = two_key_policy();
  Trajectory teacher = hinted_trajectory(policy, 2);
  teacher.reward = 0.75;

  DistillMode mode;
  mode.mode = DistillModeKind::pi_distill;
  mode.alpha = 0.5;
  ExpandedPair pair = expand_batch(teacher, mode);
  CHECK(pair.teacher.loss_weight == doctest::Approx(1.0));
  CHECK(pair.student.loss_weight == doctest::Approx(1.0));
  CHECK(pair.student.reward == teacher.reward);
  // teacher copy keeps the hinted keys; student copy moves to hint-free
  // keys while its rollout-time logp stays hinted
  CHECK(pair.teacher.tokens[0].context == "hinted0");
  CHECK(pair.student.tokens[0].context == "plain0");
  CHECK(pair.student.tokens[0].logp_old == teacher.tokens[0].logp_old);

  mode.alpha = 1.0;
  ExpandedPair pure = expand_batch(teacher, mode);
  CHECK(pure.student.loss_weight == 0.0);
  CHECK(pure.teacher.loss_weight == doctest::Approx(2.0));

  mode.alpha = 1.5;
  CHECK_THROWS_AS(expand_batch(teacher, mode), std::invalid_argument);
}

TEST_CASE("expansion copies are structurally independent") {
  const TabularPolicy policy = two_key_policy();
  Trajectory teacher = hinted_trajectory(policy, 2);
  DistillMode mode;
  mode.mode = DistillModeKind::pi_distill;
  ExpandedPair pair = expand_batch(teacher, mode);
  pair.student.tokens[0].logp_current = -42.0;
  CHECK(pair.teacher.tokens[0].logp_current == teacher.tokens[0].logp_current);
}

TEST_CASE("distillation requires distinct hint keys") {
  const TabularPolicy policy = two_key_policy();
  Trajectory traj = hinted_trajectory(policy, 1);
  traj.tokens[0].hint_free_context = traj.tokens[0].context;
  KlConfig cfg;
  cfg.direction = KlDirection::teacher_to_student;
  CHECK_THROWS_AS(per_token_kl(traj, policy, cfg), std::invalid_argument);
}
