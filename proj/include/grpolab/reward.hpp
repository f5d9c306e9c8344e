#pragma once

#include <random>
#include <string>

namespace grpolab {

enum class SemanticVerdict { consistent, inconsistent, skipped, judge_error };

const char* to_string(SemanticVerdict v);

enum class RewardScheme { layered, compile_only, binary };

RewardScheme reward_scheme_from_string(const std::string& s);
const char* to_string(RewardScheme s);

// Layered {0, 0.5, 1}: compile failure -> 0; compile success with semantic
// consistency -> 1; any other verdict after compile success -> 0.5.
// The semantic verdict is structurally unreachable on compile failure.
double settle_layered(bool compile_ok, SemanticVerdict verdict);

// Compile-only {0, 1}: determined solely by compilation.
double settle_compile_only(bool compile_ok);

// Binary {0, 1}: compile-only partial success collapses into failure.
double settle_binary(bool compile_ok, SemanticVerdict verdict);

double settle(RewardScheme scheme, bool compile_ok, SemanticVerdict verdict);

// Synthetic judge parameterized by sensitivity/specificity; returns
// consistent with probability sensitivity when the patch is truly
// semantically consistent and with probability 1-specificity otherwise.
SemanticVerdict noisy_judge(bool true_semantic, double sensitivity,
                            double specificity, std::mt19937_64& rng);

struct JudgeConfig {
  double sensitivity = 1.0;
  double specificity = 1.0;
  int retries = 2;          // attempts = retries + 1
  double fault_rate = 0.0;  // per-attempt transient failure probability
};

// Judge call with retry handling. Exhausting all attempts on transient
// faults yields judge_error (settled as compile-only partial credit).
// Safe to call concurrently as long as each caller owns its rng.
SemanticVerdict run_judge(bool true_semantic, const JudgeConfig& cfg,
                          std::mt19937_64& rng);

}  // namespace grpolab
