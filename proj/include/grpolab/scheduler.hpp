#pragma once

#include <string>
#include <vector>

namespace grpolab {

enum class Pool { inference, sandbox, compile };

const char* to_string(Pool p);
Pool pool_from_string(const std::string& s);  // throws on unknown pool

struct PoolConfig {
  int inference_cap = 4;
  int sandbox_cap = 4;
  int compile_cap = 2;
  int compile_timeout_threshold = 2;
};

struct WorkItem {
  int id = 0;
  Pool pool = Pool::inference;
  double arrival = 0.0;
  double duration = 0.0;
  int depends_on = -1;  // task id that must finish first, -1 for none
};

struct TraceEvent {
  double time = 0.0;
  bool start = true;  // start vs finish
  int task = 0;
  Pool pool = Pool::inference;
};

// Deterministic discrete-event simulation of three capped resource pools.
// Tasks queue FIFO per pool by (ready time, submission order); pools never
// block each other; a dependent task becomes ready only when its
// dependency finishes (inference slots release before dependent tool work
// starts). Caps are hard: per-pool occupancy never exceeds the cap.
std::vector<TraceEvent> schedule(const std::vector<WorkItem>& tasks,
                                 const PoolConfig& pools);

std::string trace_to_string(const std::vector<TraceEvent>& trace);

// Replay oracle: maximum concurrent occupancy seen per pool.
struct Occupancy {
  int inference = 0;
  int sandbox = 0;
  int compile = 0;
};
Occupancy peak_occupancy(const std::vector<TraceEvent>& trace);

double makespan(const std::vector<TraceEvent>& trace);

}  // namespace grpolab
