#include "grpolab/process_credit.hpp"

#include <algorithm>
#include <stdexcept>

namespace grpolab {

double mean_score(std::span<const double> scores, std::span<const int> counts) {
  if (scores.size() != counts.size()) {
    throw std::invalid_argument("scores/counts length mismatch");
  }
  double num = 0.0;
  long denom = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] < 0.0 || scores[i] > 1.0) {
      throw std::invalid_argument("process score outside [0,1]");
    }
    if (counts[i] < 0) throw std::invalid_argument("negative token count");
    num += static_cast<double>(counts[i]) * scores[i];
    denom += counts[i];
  }
  if (denom == 0) throw std::invalid_argument("no active tokens");
  return num / static_cast<double>(denom);
}

StepWeights neutral_weights(std::size_t num_steps) {
  StepWeights w;
  w.branch = WeightBranch::neutral;
  w.alpha.assign(num_steps, 1.0);
  return w;
}

StepWeights step_weights(std::span<const double> scores,
                         std::span<const int> counts, WeightBranch branch) {
  if (branch == WeightBranch::neutral) return neutral_weights(scores.size());
  const double s_bar = mean_score(scores, counts);
  if (s_bar <= 0.0) {
    // alpha_i^+ = s_i / s_bar is undefined; neutrality preserves mass
    // without inventing a ranking.
    return neutral_weights(scores.size());
  }
  StepWeights w;
  w.branch = branch;
  w.alpha.resize(scores.size());
  if (branch == WeightBranch::positive) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      w.alpha[i] = scores[i] / s_bar;
    }
    return w;  // sum n_i s_i/s_bar = sum n_i by construction
  }
  double raw_mass = 0.0;
  long mass = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w.alpha[i] = std::max(2.0 - scores[i] / s_bar, 0.1);
    raw_mass += static_cast<double>(counts[i]) * w.alpha[i];
    mass += counts[i];
  }
  const double c = static_cast<double>(mass) / raw_mass;
  for (double& a : w.alpha) a *= c;
  return w;
}

Vec token_weights(const StepWeights& weights, const MaskVec& mask,
                  std::span<const int> step_index) {
  if (static_cast<std::size_t>(mask.size()) != step_index.size()) {
    throw std::invalid_argument("mask/step_index length mismatch");
  }
  Vec w(mask.size());
  for (Eigen::Index t = 0; t < mask.size(); ++t) {
    if (mask[t] == 0) {
      w[t] = 0.0;
      continue;
    }
    const int step = step_index[static_cast<std::size_t>(t)];
    if (step < 0 || static_cast<std::size_t>(step) >= weights.alpha.size()) {
      throw std::invalid_argument("missing alpha for active step");
    }
    w[t] = weights.alpha[static_cast<std::size_t>(step)];
  }
  return w;
}

bool scores_eligible(const Trajectory& traj) {
  if (!traj.compile_ok) return false;
  for (const StepRecord& step : traj.steps) {
    if (!step.process_score) return false;
  }
  return !traj.steps.empty();
}

Vec trajectory_token_weights(const Trajectory& traj, double advantage,
                             bool process_scores_enabled) {
  const MaskVec mask = effective_mask(traj);
  std::vector<int> step_index(traj.tokens.size());
  for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
    step_index[t] = traj.tokens[t].step_index;
  }
  StepWeights weights = neutral_weights(traj.steps.size());
  if (process_scores_enabled && advantage != 0.0 && scores_eligible(traj)) {
    std::vector<double> scores;
    std::vector<int> counts;
    scores.reserve(traj.steps.size());
    for (const StepRecord& step : traj.steps) {
      scores.push_back(*step.process_score);
      counts.push_back(step.assistant_tokens);
    }
    long mass = 0;
    for (int n : counts) mass += n;
    if (mass > 0) {
      weights = step_weights(scores, counts,
                             advantage > 0.0 ? WeightBranch::positive
                                             : WeightBranch::negative);
    }
  }
  return token_weights(weights, mask, step_index);
}

}  // namespace grpolab
