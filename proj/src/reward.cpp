#include "grpolab/reward.hpp"

#include <stdexcept>

namespace grpolab {

const char* to_string(SemanticVerdict v) {
  switch (v) {
    case SemanticVerdict::consistent: return "consistent";
    case SemanticVerdict::inconsistent: return "inconsistent";
    case SemanticVerdict::skipped: return "skipped";
    case SemanticVerdict::judge_error: return "judge_error";
  }
  return "skipped";
}

RewardScheme reward_scheme_from_string(const std::string& s) {
  if (s == "layered") return RewardScheme::layered;
  if (s == "compile_only") return RewardScheme::compile_only;
  if (s == "binary") return RewardScheme::binary;
  throw std::invalid_argument("unknown reward scheme: " + s);
}

const char* to_string(RewardScheme s) {
  switch (s) {
    case RewardScheme::layered: return "layered";
    case RewardScheme::compile_only: return "compile_only";
    case RewardScheme::binary: return "binary";
  }
  return "layered";
}

double settle_layered(bool compile_ok, SemanticVerdict verdict) {
  if (!compile_ok) return 0.0;
  return verdict == SemanticVerdict::consistent ? 1.0 : 0.5;
}

double settle_compile_only(bool compile_ok) { return compile_ok ? 1.0 : 0.0; }

double settle_binary(bool compile_ok, SemanticVerdict verdict) {
  return (compile_ok && verdict == SemanticVerdict::consistent) ? 1.0 : 0.0;
}

double settle(RewardScheme scheme, bool compile_ok, SemanticVerdict verdict) {
  switch (scheme) {
    case RewardScheme::layered: return settle_layered(compile_ok, verdict);
    case RewardScheme::compile_only: return settle_compile_only(compile_ok);
    case RewardScheme::binary: return settle_binary(compile_ok, verdict);
  }
  return 0.0;
}

SemanticVerdict noisy_judge(bool true_semantic, double sensitivity,
                            double specificity, std::mt19937_64& rng) {
  if (sensitivity < 0.0 || sensitivity > 1.0 || specificity < 0.0 ||
      specificity > 1.0) {
    throw std::invalid_argument("sensitivity/specificity must lie in [0,1]");
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double p_consistent = true_semantic ? sensitivity : 1.0 - specificity;
  return unif(rng) < p_consistent ? SemanticVerdict::consistent
                                  : SemanticVerdict::inconsistent;
}

SemanticVerdict run_judge(bool true_semantic, const JudgeConfig& cfg,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int attempts = cfg.retries + 1;
  for (int a = 0; a < attempts; ++a) {
    if (cfg.fault_rate > 0.0 && unif(rng) < cfg.fault_rate) continue;
    return noisy_judge(true_semantic, cfg.sensitivity, cfg.specificity, rng);
  }
  return SemanticVerdict::judge_error;
}

}  // namespace grpolab
