#pragma once

#include <span>
#include <vector>

#include "grpolab/trajectory.hpp"

namespace grpolab {

enum class Handling { Normal, MaskAll, KeepLastStep };

const char* to_string(Handling h);

struct Limits {
  int max_steps = 50;
  long max_context_tokens = 4096;
  int max_step_tokens = 256;
};

// One generation turn as seen by the exit classifier.
struct TurnEvent {
  ActionKind kind = ActionKind::other;
  int output_tokens = 1;   // assistant tokens emitted this turn
  int echo_tokens = 0;
  int tool_calls = 1;      // parsed tool calls in the turn
  bool compile_timeout = false;
  bool repetition_detected = false;
  bool aborted = false;
  bool setup_failed = false;
};

// First-triggered rule wins, scanning turns in order; an event log with no
// trigger and no finish is no_tool_call_stop.
ExitReason classify_exit(std::span<const TurnEvent> events, const Limits& limits,
                         int compile_timeout_threshold = 2);

// Failure-cause routing: unlearnable exceptions -> MaskAll, sampling
// degeneration -> KeepLastStep, valid trajectories -> Normal.
Handling route(ExitReason reason);

// MaskAll: zero override mask, R forced to 0, settlement skipped.
// KeepLastStep: override keeps only the final assistant turn's tokens, R
// forced to 0. The trajectory always remains in its group.
void apply_routing(Trajectory& traj, Handling handling);

// True iff some n-gram with length in [min_len, max_len] occurs more than
// max_repeats times in the token stream.
bool detect_repetition(std::span<const int> tokens, int min_len = 15,
                       int max_len = 50, int max_repeats = 30);

bool detect_excessive_tool_calls(int parsed_tool_calls, int threshold = 5);

enum class TimeoutVerdict { keep_going, abort_next_step };

TimeoutVerdict compile_timeout_guard(int consecutive_timeouts, int threshold);

}  // namespace grpolab
