#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "grpolab/grpo.hpp"

using namespace grpolab;

TEST_CASE("group advantages normalize by the population std") {
  Vec r(4);
  r << 1.0, 0.5, 0.5, 0.0;
  const Vec a = group_advantages(r, 1e-8);
  CHECK(a[0] == doctest::Approx(1.414214).epsilon(1e-6));
  CHECK(a[1] == doctest::Approx(0.0));
  CHECK(a[2] == doctest::Approx(0.0));
  CHECK(a[3] == doctest::Approx(-1.414214).epsilon(1e-6));
}

TEST_CASE("degenerate groups collapse to zero advantage") {
  Vec r(3);
  r << 0.5, 0.5, 0.5;
  const Vec a = group_advantages(r, 1e-8);
  for (int i = 0; i < 3; ++i) CHECK(a[i] == 0.0);
}

TEST_CASE("groups of one are rejected") {
  Vec r(1);
  r << 1.0;
  CHECK_THROWS_AS(group_advantages(r, 1e-8), std::invalid_argument);
}

TEST_CASE("random groups match a two-pass oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  std::uniform_int_distribution<int> size(2, 8);
  for (int rep = 0; rep < 10000; ++rep) {
    const int k = size(rng);
    Vec r(k);
    for (int i = 0; i < k; ++i) r[i] = reward(rng);
    double mean = 0.0;
    for (int i = 0; i < k; ++i) mean += r[i];
    mean /= k;
    double var = 0.0;
    for (int i = 0; i < k; ++i) var += (r[i] - mean) * (r[i] - mean);
    const double std = std::sqrt(var / k);
    const Vec a = group_advantages(r, 1e-8);
    if (std < 1e-8) {
      for (int i = 0; i < k; ++i) CHECK(a[i] == 0.0);
      continue;
    }
    double a_mean = 0.0, a_var = 0.0;
    for (int i = 0; i < k; ++i) {
      CHECK(a[i] == doctest::Approx((r[i] - mean) / std).epsilon(1e-12));
      a_mean += a[i];
    }
    a_mean /= k;
    for (int i = 0; i < k; ++i) a_var += (a[i] - a_mean) * (a[i] - a_mean);
    CHECK(std::abs(a_mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(a_var / k) - 1.0) <= 1e-9);
  }
}

TEST_CASE("reward-scale anchor: constant shifts change nothing") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> reward(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    Vec r(5);
    for (int i = 0; i < 5; ++i) r[i] = reward(rng);
    const Vec a = group_advantages(r, 1e-8);
    const Vec shifted = group_advantages((r.array() + 3.7).matrix(), 1e-8);
    for (int i = 0; i < 5; ++i) CHECK(a[i] == doctest::Approx(shifted[i]).epsilon(1e-9));
  }
}

TEST_CASE("asymmetric clipped term") {
  const ClipConfig cfg;
  CHECK(clipped_term(2.0, 1.0, cfg) == doctest::Approx(1.28));
  CHECK(clipped_term(0.5, -1.0, cfg) == doctest::Approx(-0.8));
  CHECK(clipped_term(1.0, 0.37, cfg) == doctest::Approx(0.37));
  CHECK_THROWS_AS(clipped_term(0.0, 1.0, cfg), std::invalid_argument);
}

TEST_CASE("clip envelope bounds the unclipped term") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ratio(0.05, 3.0);
  std::uniform_real_distribution<double> adv(-2.0, 2.0);
  const ClipConfig cfg;
  for (int rep = 0; rep < 5000; ++rep) {
    const double rho = ratio(rng);
    const double a = adv(rng);
    const double term = clipped_term(rho, a, cfg);
    const double clamped = std::clamp(rho, 1.0 - cfg.eps_lo, 1.0 + cfg.eps_hi);
    // the pessimistic objective takes the smaller of the two candidates
    CHECK(term == doctest::Approx(std::min(rho * a, clamped * a)).epsilon(1e-12));
    CHECK(term <= rho * a + 1e-15);
    if (rho >= 1.0 - cfg.eps_lo && rho <= 1.0 + cfg.eps_hi) {
      CHECK(term == doctest::Approx(rho * a).epsilon(1e-12));
    }
  }
}

TEST_CASE("low-variance KL estimator") {
  CHECK(low_var_kl(-1.5, -1.5) == 0.0);
  CHECK(low_var_kl(-2.0, -1.0) == doctest::Approx(std::exp(1.0) - 2.0).epsilon(1e-9));
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> lp(-6.0, -0.01);
  for (int rep = 0; rep < 100000; ++rep) {
    CHECK(low_var_kl(lp(rng), lp(rng)) >= 0.0);
  }
  CHECK_THROWS_AS(low_var_kl(std::numeric_limits<double>::infinity(), -1.0),
                  std::invalid_argument);
}

namespace {

struct TinyInstance {
  TabularPolicy policy;
  std::vector<RolloutGroup> groups;
  std::vector<std::vector<Vec>> weights;
};

// Random K=2 group over a handful of contexts, ratios kept strictly inside
// the clip band so the loss is differentiable at the evaluation point.
TinyInstance random_instance(std::mt19937_64& rng, int vocab, int num_contexts,
                             int tokens_per_traj) {
  std::uniform_real_distribution<double> logit(-1.0, 1.0);
  std::uniform_real_distribution<double> shift(-0.12, 0.12);
  std::uniform_int_distribution<int> action(0, vocab - 1);
  std::uniform_int_distribution<int> ctx(0, num_contexts - 1);
  std::uniform_real_distribution<double> weight(0.3, 1.7);

  TinyInstance inst;
  inst.policy = TabularPolicy(vocab);
  for (int c = 0; c < num_contexts; ++c) {
    Eigen::VectorXd& row = inst.policy.row("ctx" + std::to_string(c));
    for (int a = 0; a < vocab; ++a) row[a] = logit(rng);
  }

  RolloutGroup group;
  group.prompt_id = "p";
  Vec rewards(2);
  rewards << 1.0, 0.0;
  for (int k = 0; k < 2; ++k) {
    Trajectory traj;
    Vec w(tokens_per_traj);
    for (int t = 0; t < tokens_per_traj; ++t) {
      TokenRecord tok;
      tok.role_flag = 1;
      tok.step_index = 0;
      tok.context = "ctx" + std::to_string(ctx(rng));
      tok.token_id = action(rng);
      const double lp = inst.policy.log_prob(tok.context, tok.token_id);
      tok.logp_current = lp;
      tok.logp_old = lp - shift(rng);  // ratio in (0.887, 1.127)
      tok.logp_ref = lp - shift(rng);
      traj.tokens.push_back(tok);
      w[t] = weight(rng);
    }
    group.trajectories.push_back(std::move(traj));
    inst.weights.emplace_back();
    inst.weights.back().push_back(w);
  }
  group.rewards = rewards;
  group.advantages = group_advantages(rewards, 1e-8);
  // weights layout is per group, not per trajectory
  std::vector<Vec> flat{inst.weights[0][0], inst.weights[1][0]};
  inst.weights.clear();
  inst.weights.push_back(flat);
  inst.groups.push_back(std::move(group));
  return inst;
}

}  // namespace

TEST_CASE("analytic gradient matches central finite differences") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> vocab_d(2, 4);
  std::uniform_int_distribution<int> ctx_d(1, 3);
  const double h = 1e-5;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    ClipConfig cfg;
    cfg.kl_coef = 0.01;
    cfg.entropy_coef = (rep % 3 == 0) ? 0.05 : 0.0;
    TinyInstance inst = random_instance(rng, vocab_d(rng), ctx_d(rng), 4);

    TabularPolicy::Table grad;
    grpo_loss(inst.groups, inst.weights, cfg, &inst.policy, &grad);

    for (auto& [key, row] : inst.policy.table()) {
      for (Eigen::Index a = 0; a < row.size(); ++a) {
        const double saved = row[a];
        row[a] = saved + h;
        const double up = grpo_loss(inst.groups, inst.weights, cfg, &inst.policy).loss;
        row[a] = saved - h;
        const double down = grpo_loss(inst.groups, inst.weights, cfg, &inst.policy).loss;
        row[a] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = grad.count(key) ? grad.at(key)[a] : 0.0;
        const double rel = std::abs(an - fd) / std::max(std::abs(fd), 1e-6);
        worst = std::max(worst, rel);
      }
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("mask dominance: zero-weight tokens contribute exactly nothing") {
  std::mt19937_64 rng(29);
  TinyInstance inst = random_instance(rng, 3, 2, 5);
  inst.weights[0][1].setZero();  // silence the whole second trajectory
  const ClipConfig cfg;
  const double base = grpo_loss(inst.groups, inst.weights, cfg, &inst.policy).loss;
  // perturbing a silenced token's stored values changes nothing
  inst.groups[0].trajectories[1].tokens[0].logp_old = -25.0;
  inst.groups[0].trajectories[1].tokens[2].logp_ref = -25.0;
  const double after = grpo_loss(inst.groups, inst.weights, cfg, &inst.policy).loss;
  CHECK(base == after);

  TabularPolicy::Table grad;
  grpo_loss(inst.groups, inst.weights, cfg, &inst.policy, &grad);
  // gradient equals the one computed from the first trajectory alone
  TinyInstance solo = inst;
  solo.groups[0].trajectories.erase(solo.groups[0].trajectories.begin() + 1);
  solo.groups[0].rewards.conservativeResize(1);
  solo.groups[0].advantages.conservativeResize(1);
  solo.weights[0].erase(solo.weights[0].begin() + 1);
  // adjust for the 1/N change between the two calls
  TabularPolicy::Table solo_grad;
  grpo_loss(solo.groups, solo.weights, cfg, &solo.policy, &solo_grad);
  for (const auto& [key, row] : grad) {
    REQUIRE(solo_grad.count(key) == 1);
    for (Eigen::Index a = 0; a < row.size(); ++a) {
      CHECK(row[a] * 2.0 == doctest::Approx(solo_grad.at(key)[a]).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero advantage leaves only the KL component") {
  std::mt19937_64 rng(31);
  TinyInstance inst = random_instance(rng, 3, 2, 4);
  inst.groups[0].advantages.setZero();
  ClipConfig cfg;
  cfg.kl_coef = 0.5;
  const LossReport report = grpo_loss(inst.groups, inst.weights, cfg, &inst.policy);
  CHECK(report.pg == 0.0);
  CHECK(report.kl != 0.0);
  CHECK(report.loss == doctest::Approx(report.kl).epsilon(1e-12));
}

TEST_CASE("stored-logp path reproduces the policy path") {
  std::mt19937_64 rng(37);
  TinyInstance inst = random_instance(rng, 4, 3, 6);
  const ClipConfig cfg;
  const LossReport with_policy = grpo_loss(inst.groups, inst.weights, cfg, &inst.policy);
  for (Trajectory& traj : inst.groups[0].trajectories) {
    refresh_current_logps(traj, inst.policy);
  }
  const LossReport replayed = grpo_loss(inst.groups, inst.weights, cfg);
  CHECK(replayed.loss == doctest::Approx(with_policy.loss).epsilon(1e-12));
  CHECK(replayed.pg == doctest::Approx(with_policy.pg).epsilon(1e-12));
  CHECK(replayed.kl == doctest::Approx(with_policy.kl).epsilon(1e-12));
}

TEST_CASE("per-token advantage offsets shift the broadcast advantage") {
  std::mt19937_64 rng(41);
  TinyInstance inst = random_instance(rng, 3, 1, 3);
  ClipConfig cfg;
  cfg.kl_coef = 0.0;
  std::vector<std::vector<Vec>> offsets;
  offsets.emplace_back();
  offsets.back().push_back(Vec::Zero(3));
  offsets.back().push_back(Vec::Zero(3));
  const double base = grpo_loss(inst.groups, inst.weights, cfg, &inst.policy).loss;
  const double zeroed =
      grpo_loss(inst.groups, inst.weights, cfg, &inst.policy, nullptr, &offsets).loss;
  CHECK(base == doctest::Approx(zeroed).epsilon(1e-15));
  offsets[0][0][1] = 0.25;
  const double shifted =
      grpo_loss(inst.groups, inst.weights, cfg, &inst.policy, nullptr, &offsets).loss;
  CHECK(shifted != base);
}
