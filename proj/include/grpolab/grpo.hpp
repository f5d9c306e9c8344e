#pragma once

#include <span>
#include <vector>

#include "grpolab/policy.hpp"
#include "grpolab/trajectory.hpp"

namespace grpolab {

struct ClipConfig {
  double eps_lo = 0.2;
  double eps_hi = 0.28;
  double kl_coef = 0.01;
  double entropy_coef = 0.0;
  double degeneracy_eps = 1e-8;
};

// K same-prompt trajectories with their settled rewards and
// group-normalized advantages. Abnormal trajectories stay in the group.
struct RolloutGroup {
  std::string prompt_id;
  std::vector<Trajectory> trajectories;
  Vec rewards;
  Vec advantages;
};

// A_k = (R_k - mean) / population std; all-zero when std < eps.
// Throws for K < 2.
Vec group_advantages(const Vec& rewards, double eps);

void settle_advantages(RolloutGroup& group, double eps);

// min(rho*A, clip(rho, 1-eps_lo, 1+eps_hi)*A).
double clipped_term(double rho, double advantage, const ClipConfig& cfg);

// Nonnegative estimator r - log r - 1 with r = exp(logp_ref - logp_cur).
double low_var_kl(double logp_cur, double logp_ref);

struct LossReport {
  double loss = 0.0;
  double pg = 0.0;       // policy-gradient component (already negated)
  double kl = 0.0;       // kl_coef-scaled penalty component
  double entropy = 0.0;  // mean token-weighted policy entropy
};

// Token-weighted clipped GRPO loss over a batch of groups:
//
//   loss = (1/N) sum_k loss_weight_k * (1/D_k) sum_t
//            [ -w_t * clip_t + kl_coef * w_t * kl_t
//              - entropy_coef * w_t * H_t ]
//
// with D_k = max(1, sum_t effective_mask_t) per trajectory and N the total
// trajectory count. token_weights[g][k] must match the group layout.
//
// When `policy` is non-null, logp_current is recomputed from it (tokens
// carry their context keys) and the analytic gradient is accumulated into
// `grad` in deterministic group order; otherwise stored logp_current is
// used and no gradient is produced (replay path).
// Recomputes logp_current of every assistant token from its context key.
void refresh_current_logps(Trajectory& traj, const TabularPolicy& policy);

// `advantage_offsets`, when given, adds a per-token term to the broadcast
// trajectory advantage (the experimental per-token-KL-in-advantage mode).
LossReport grpo_loss(std::span<const RolloutGroup> groups,
                     const std::vector<std::vector<Vec>>& token_weights,
                     const ClipConfig& cfg,
                     const TabularPolicy* policy = nullptr,
                     TabularPolicy::Table* grad = nullptr,
                     const std::vector<std::vector<Vec>>* advantage_offsets = nullptr);

}  // namespace grpolab
