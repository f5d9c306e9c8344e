#include "grpolab/governance.hpp"

#include <map>
#include <stdexcept>

namespace grpolab {

const char* to_string(Handling h) {
  switch (h) {
    case Handling::Normal: return "normal";
    case Handling::MaskAll: return "mask_all";
    case Handling::KeepLastStep: return "keep_last_step";
  }
  return "normal";
}

ExitReason classify_exit(std::span<const TurnEvent> events, const Limits& limits,
                         int compile_timeout_threshold) {
  long context_tokens = 0;
  int consecutive_timeouts = 0;
  int steps = 0;
  for (const TurnEvent& ev : events) {
    ++steps;
    context_tokens += ev.output_tokens + ev.echo_tokens;
    if (ev.setup_failed) return ExitReason::environment_setup_failed;
    if (ev.aborted) return ExitReason::abort_generation;
    if (ev.repetition_detected) return ExitReason::catastrophic_repetition;
    if (detect_excessive_tool_calls(ev.tool_calls)) {
      return ExitReason::excessive_tool_calls;
    }
    if (ev.kind == ActionKind::compile) {
      consecutive_timeouts = ev.compile_timeout ? consecutive_timeouts + 1 : 0;
      if (compile_timeout_guard(consecutive_timeouts, compile_timeout_threshold) ==
          TimeoutVerdict::abort_next_step) {
        return ExitReason::consecutive_compile_timeouts;
      }
    }
    if (ev.output_tokens >= limits.max_step_tokens) return ExitReason::max_tokens;
    if (context_tokens >= limits.max_context_tokens) return ExitReason::context_limit;
    if (ev.kind == ActionKind::finish) return ExitReason::finish_called;
    if (steps >= limits.max_steps) return ExitReason::max_steps;
  }
  return ExitReason::no_tool_call_stop;
}

Handling route(ExitReason reason) {
  switch (reason) {
    case ExitReason::context_limit:
    case ExitReason::abort_generation:
    case ExitReason::max_tokens:
    case ExitReason::consecutive_compile_timeouts:
    case ExitReason::environment_setup_failed:
      return Handling::MaskAll;
    case ExitReason::catastrophic_repetition:
    case ExitReason::excessive_tool_calls:
      return Handling::KeepLastStep;
    case ExitReason::finish_called:
    case ExitReason::max_steps:
    case ExitReason::no_tool_call_stop:
      return Handling::Normal;
  }
  throw std::invalid_argument("unroutable exit reason");
}

void apply_routing(Trajectory& traj, Handling handling) {
  switch (handling) {
    case Handling::Normal:
      return;
    case Handling::MaskAll:
      traj.loss_mask_override = MaskVec::Zero(traj.token_count());
      traj.reward = 0.0;
      traj.compile_ok = false;
      return;
    case Handling::KeepLastStep: {
      // Only the final assistant turn's model tokens survive; its echo
      // tokens stay masked as well.
      MaskVec ov = MaskVec::Zero(traj.token_count());
      if (!traj.steps.empty()) {
        const StepRecord& last = traj.steps.back();
        for (int t = last.assistant_begin; t < last.assistant_end; ++t) {
          ov[t] = 1;
        }
      }
      traj.loss_mask_override = std::move(ov);
      traj.reward = 0.0;
      traj.compile_ok = false;
      return;
    }
  }
}

bool detect_repetition(std::span<const int> tokens, int min_len, int max_len,
                       int max_repeats) {
  const int total = static_cast<int>(tokens.size());
  for (int n = min_len; n <= max_len; ++n) {
    if (n > total) break;
    std::map<std::vector<int>, int> counts;
    for (int start = 0; start + n <= total; ++start) {
      std::vector<int> gram(tokens.begin() + start, tokens.begin() + start + n);
      if (++counts[gram] > max_repeats) return true;
    }
  }
  return false;
}

bool detect_excessive_tool_calls(int parsed_tool_calls, int threshold) {
  return parsed_tool_calls > threshold;
}

TimeoutVerdict compile_timeout_guard(int consecutive_timeouts, int threshold) {
  if (threshold < 1) throw std::invalid_argument("threshold must be positive");
  return consecutive_timeouts >= threshold ? TimeoutVerdict::abort_next_step
                                           : TimeoutVerdict::keep_going;
}

}  // namespace grpolab
