#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace grpolab {

using Vec = Eigen::VectorXd;
using MaskVec = Eigen::VectorXi;

enum class ActionKind { view, edit, compile, finish, other };

const char* to_string(ActionKind kind);
ActionKind action_kind_from_string(const std::string& s);

enum class ExitReason {
  finish_called,
  max_steps,
  no_tool_call_stop,
  context_limit,
  abort_generation,
  max_tokens,
  catastrophic_repetition,
  excessive_tool_calls,
  consecutive_compile_timeouts,
  environment_setup_failed,
};

const char* to_string(ExitReason reason);
ExitReason exit_reason_from_string(const std::string& s);

// One serialized token. Echo tokens (role_flag == 0) carry log-probabilities
// too; every loss path ignores them.
struct TokenRecord {
  int token_id = 0;
  int role_flag = 0;  // m_t: 1 = assistant-generated, 0 = environment echo
  int step_index = 0;
  std::string context;            // policy context key at sampling time
  std::string hint_free_context;  // student-side key, when it differs
  std::string teacher_context;    // hint-conditioned key, when recorded
  double logp_current = 0.0;
  double logp_old = 0.0;
  double logp_ref = 0.0;
  std::optional<double> logp_teacher;
};

// One tool-interaction turn: the assistant span followed by its echo span.
// Spans are half-open token index ranges.
struct StepRecord {
  ActionKind kind = ActionKind::other;
  int assistant_begin = 0;
  int assistant_end = 0;
  int echo_begin = 0;
  int echo_end = 0;
  int assistant_tokens = 0;               // n_i
  std::optional<double> process_score;    // s_i in [0,1]
};

struct Trajectory {
  std::string prompt_id;
  std::vector<StepRecord> steps;
  std::vector<TokenRecord> tokens;
  ExitReason exit_reason = ExitReason::no_tool_call_stop;
  double reward = 0.0;  // settled scalar R
  bool compile_ok = false;
  std::optional<MaskVec> loss_mask_override;
  double loss_weight = 1.0;  // batch-expansion copy weight, 1 otherwise

  int token_count() const { return static_cast<int>(tokens.size()); }
};

// Assistant-only mask m: m_t = 1 exactly on assistant-generated tokens.
MaskVec build_mask(const Trajectory& traj);

// Effective binary mask: element-wise product of m and loss_mask_override
// when present. No token with m_t = 0 is ever active.
MaskVec effective_mask(const Trajectory& traj);

// Per-step active assistant token counts n_i. Throws std::invalid_argument
// when spans and role flags disagree.
std::vector<int> step_token_counts(const Trajectory& traj);

// Checks the step partition and span/flag consistency; throws on violation.
void validate_trajectory(const Trajectory& traj);

std::string serialize_trajectory(const Trajectory& traj);
Trajectory deserialize_trajectory(const std::string& line);

}  // namespace grpolab
