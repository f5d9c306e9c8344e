#include "grpolab/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace grpolab {

KlAggregation kl_aggregation_from_string(const std::string& s) {
  if (s == "masked_sum") return KlAggregation::masked_sum;
  if (s == "masked_mean") return KlAggregation::masked_mean;
  if (s == "per_token_in_advantage") return KlAggregation::per_token_in_advantage;
  throw std::invalid_argument("unknown kl aggregation: " + s);
}

const char* to_string(KlAggregation a) {
  switch (a) {
    case KlAggregation::masked_sum: return "masked_sum";
    case KlAggregation::masked_mean: return "masked_mean";
    case KlAggregation::per_token_in_advantage: return "per_token_in_advantage";
  }
  return "masked_sum";
}

namespace {

void check_normalized(const Vec& p) {
  if (std::abs(p.sum() - 1.0) > 1e-6 || p.minCoeff() < 0.0) {
    throw std::invalid_argument("distribution is not normalized");
  }
}

double kl_full(const Vec& p, const Vec& q) {
  double kl = 0.0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p[a] <= 0.0) continue;
    if (q[a] <= 0.0) throw std::invalid_argument("KL undefined: q has zero mass where p > 0");
    kl += p[a] * std::log(p[a] / q[a]);
  }
  return kl;
}

// Top-k of p with the remaining mass of both sides lumped into one tail
// bucket; lossless when k covers the support.
double kl_topk(const Vec& p, const Vec& q, int k) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return p[a] > p[b]; });
  double kl = 0.0;
  double p_tail = 1.0;
  double q_tail = 1.0;
  const int keep = std::min<int>(k, static_cast<int>(p.size()));
  for (int i = 0; i < keep; ++i) {
    const Eigen::Index a = order[static_cast<std::size_t>(i)];
    p_tail -= p[a];
    q_tail -= q[a];
    if (p[a] <= 0.0) continue;
    if (q[a] <= 0.0) throw std::invalid_argument("KL undefined: q has zero mass where p > 0");
    kl += p[a] * std::log(p[a] / q[a]);
  }
  p_tail = std::max(p_tail, 0.0);
  q_tail = std::max(q_tail, 0.0);
  if (p_tail > 1e-15) {
    if (q_tail <= 0.0) throw std::invalid_argument("KL undefined: empty tail in q");
    kl += p_tail * std::log(p_tail / q_tail);
  }
  return kl;
}

}  // namespace

double token_kl(const Vec& p_teacher, const Vec& p_student,
                KlDirection direction, std::optional<int> topk) {
  if (p_teacher.size() != p_student.size()) {
    throw std::invalid_argument("vocabulary size mismatch");
  }
  check_normalized(p_teacher);
  check_normalized(p_student);
  if (topk && (*topk < 1 || *topk > p_teacher.size())) {
    throw std::invalid_argument("topk outside [1, vocab]");
  }
  const Vec& p = direction == KlDirection::teacher_to_student ? p_teacher : p_student;
  const Vec& q = direction == KlDirection::teacher_to_student ? p_student : p_teacher;
  return topk ? kl_topk(p, q, *topk) : kl_full(p, q);
}

Vec per_token_kl(const Trajectory& traj, const TabularPolicy& policy,
                 const KlConfig& cfg) {
  Vec kls = Vec::Zero(traj.token_count());
  const MaskVec mask = build_mask(traj);
  for (int t = 0; t < traj.token_count(); ++t) {
    if (!mask[t]) continue;
    const TokenRecord& tok = traj.tokens[static_cast<std::size_t>(t)];
    const std::string& teacher_key =
        tok.teacher_context.empty() ? tok.context : tok.teacher_context;
    const std::string& student_key =
        tok.hint_free_context.empty() ? tok.context : tok.hint_free_context;
    if (teacher_key == student_key) {
      throw std::invalid_argument("token lacks a hint-conditioned context for distillation");
    }
    const Vec teacher = policy.probs(teacher_key);
    const Vec student = policy.probs(student_key);
    kls[t] = token_kl(teacher, student, cfg.direction, cfg.topk);
  }
  return kls;
}

std::variant<double, Vec> masked_kl(const Trajectory& traj,
                                    const TabularPolicy& policy,
                                    const KlConfig& cfg) {
  const Vec kls = per_token_kl(traj, policy, cfg);
  switch (cfg.aggregation) {
    case KlAggregation::masked_sum:
      return kls.sum();
    case KlAggregation::masked_mean: {
      const double active = static_cast<double>(build_mask(traj).sum());
      return kls.sum() / std::max(1.0, active);
    }
    case KlAggregation::per_token_in_advantage:
      return kls;
  }
  return kls.sum();
}

double shape_reward_opsd(double r_env, double kl, double beta) {
  if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
  return r_env - beta * kl;
}

double shape_reward_pidistill(double r_env, double kl_teacher_to_student,
                              double beta) {
  if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
  return r_env - beta * kl_teacher_to_student;
}

ExpandedPair expand_batch(const Trajectory& teacher_traj, const DistillMode& mode) {
  if (mode.alpha < 0.0 || mode.alpha > 1.0) {
    throw std::invalid_argument("alpha outside [0,1]");
  }
  ExpandedPair pair{teacher_traj, teacher_traj};
  pair.teacher.loss_weight = 2.0 * mode.alpha;
  pair.student.loss_weight = 2.0 * (1.0 - mode.alpha);
  // Student copy evaluates hint-free tokens against the hinted rollout
  // distribution (off-policy ratio); the hinted key moves to logp_teacher.
  for (TokenRecord& tok : pair.student.tokens) {
    if (!tok.role_flag) continue;
    if (tok.hint_free_context.empty()) {
      throw std::invalid_argument("teacher trajectory lacks hint-free contexts");
    }
    tok.logp_teacher = tok.logp_current;
    tok.context = tok.hint_free_context;
  }
  return pair;
}

}  // namespace grpolab
