#pragma once

#include <span>
#include <vector>

#include "grpolab/trajectory.hpp"

namespace grpolab {

enum class WeightBranch { positive, negative, neutral };

// Per-step loss-weight multipliers alpha_i. Mass preservation
// sum_i n_i * alpha_i = sum_i n_i holds in the positive and negative
// branches; the neutral branch is alpha_i == 1.
struct StepWeights {
  std::vector<double> alpha;
  WeightBranch branch = WeightBranch::neutral;
};

// Token-weighted mean s_bar = sum n_i s_i / sum n_i. Throws when
// sum n_i == 0 (callers must use the neutral branch there).
double mean_score(std::span<const double> scores, std::span<const int> counts);

// Positive branch: alpha_i = s_i / s_bar.
// Negative branch: alpha_i = c * max(2 - s_i/s_bar, 0.1) with c chosen so
// sum n_i alpha_i = sum n_i. The inversion penalizes low-scoring steps
// harder on negative-advantage trajectories.
// s_bar == 0 falls back to neutral weights.
StepWeights step_weights(std::span<const double> scores,
                         std::span<const int> counts, WeightBranch branch);

StepWeights neutral_weights(std::size_t num_steps);

// w_t = effective_mask_t * alpha_{i(t)}. Echo and overridden tokens get 0.
Vec token_weights(const StepWeights& weights, const MaskVec& mask,
                  std::span<const int> step_index);

// App-level eligibility: scores apply only when compilation succeeded and
// every step carries a valid score; otherwise neutral.
bool scores_eligible(const Trajectory& traj);

// Full per-trajectory weight pipeline: eligibility gate, advantage-sign
// branch selection (zero advantage maps to neutral), step weights, then
// the token-level product with the effective mask.
Vec trajectory_token_weights(const Trajectory& traj, double advantage,
                             bool process_scores_enabled);

}  // namespace grpolab
