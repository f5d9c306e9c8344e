#include "grpolab/scheduler.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace grpolab {

const char* to_string(Pool p) {
  switch (p) {
    case Pool::inference: return "inference";
    case Pool::sandbox: return "sandbox";
    case Pool::compile: return "compile";
  }
  return "inference";
}

Pool pool_from_string(const std::string& s) {
  if (s == "inference") return Pool::inference;
  if (s == "sandbox") return Pool::sandbox;
  if (s == "compile") return Pool::compile;
  throw std::invalid_argument("unknown resource pool: " + s);
}

namespace {

int cap_of(const PoolConfig& pools, Pool p) {
  switch (p) {
    case Pool::inference: return pools.inference_cap;
    case Pool::sandbox: return pools.sandbox_cap;
    case Pool::compile: return pools.compile_cap;
  }
  return 1;
}

struct TimedIdx {
  double time;
  std::size_t idx;
  bool operator>(const TimedIdx& o) const {
    return time > o.time || (time == o.time && idx > o.idx);
  }
};

}  // namespace

std::vector<TraceEvent> schedule(const std::vector<WorkItem>& tasks,
                                 const PoolConfig& pools) {
  if (pools.inference_cap < 1 || pools.sandbox_cap < 1 || pools.compile_cap < 1) {
    throw std::invalid_argument("pool caps must be >= 1");
  }
  std::map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].duration < 0.0 || tasks[i].arrival < 0.0) {
      throw std::invalid_argument("negative arrival or duration");
    }
    if (!by_id.emplace(tasks[i].id, i).second) {
      throw std::invalid_argument("duplicate task id");
    }
  }
  std::vector<std::vector<std::size_t>> children(tasks.size());
  std::vector<bool> has_dep(tasks.size(), false);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].depends_on < 0) continue;
    auto it = by_id.find(tasks[i].depends_on);
    if (it == by_id.end() || it->second >= i) {
      throw std::invalid_argument("dependency must name an earlier task");
    }
    children[it->second].push_back(i);
    has_dep[i] = true;
  }

  using MinHeap =
      std::priority_queue<TimedIdx, std::vector<TimedIdx>, std::greater<>>;
  MinHeap arrivals;  // tasks becoming ready
  MinHeap finishes;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!has_dep[i]) arrivals.push({tasks[i].arrival, i});
  }

  std::deque<std::size_t> queue_per_pool[3];
  int running[3] = {0, 0, 0};
  std::vector<TraceEvent> trace;

  while (!arrivals.empty() || !finishes.empty()) {
    double t = std::numeric_limits<double>::infinity();
    if (!arrivals.empty()) t = std::min(t, arrivals.top().time);
    if (!finishes.empty()) t = std::min(t, finishes.top().time);

    // finishes first: slots released before anything else starts at t
    while (!finishes.empty() && finishes.top().time == t) {
      const std::size_t i = finishes.top().idx;
      finishes.pop();
      const WorkItem& task = tasks[i];
      trace.push_back({t, false, task.id, task.pool});
      --running[static_cast<int>(task.pool)];
      for (std::size_t child : children[i]) {
        arrivals.push({std::max(tasks[child].arrival, t), child});
      }
    }
    while (!arrivals.empty() && arrivals.top().time == t) {
      const std::size_t i = arrivals.top().idx;
      arrivals.pop();
      queue_per_pool[static_cast<int>(tasks[i].pool)].push_back(i);
    }
    for (int p = 0; p < 3; ++p) {
      auto& queue = queue_per_pool[p];
      const int cap = cap_of(pools, static_cast<Pool>(p));
      while (running[p] < cap && !queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        trace.push_back({t, true, tasks[i].id, tasks[i].pool});
        ++running[p];
        finishes.push({t + tasks[i].duration, i});
      }
    }
  }
  return trace;
}

std::string trace_to_string(const std::vector<TraceEvent>& trace) {
  std::ostringstream out;
  out.precision(12);
  for (const TraceEvent& ev : trace) {
    out << ev.time << ' ' << (ev.start ? "start" : "finish") << ' ' << ev.task
        << ' ' << to_string(ev.pool) << '\n';
  }
  return out.str();
}

Occupancy peak_occupancy(const std::vector<TraceEvent>& trace) {
  Occupancy peak;
  int running[3] = {0, 0, 0};
  for (const TraceEvent& ev : trace) {
    int& r = running[static_cast<int>(ev.pool)];
    r += ev.start ? 1 : -1;
    peak.inference = std::max(peak.inference, running[0]);
    peak.sandbox = std::max(peak.sandbox, running[1]);
    peak.compile = std::max(peak.compile, running[2]);
  }
  return peak;
}

double makespan(const std::vector<TraceEvent>& trace) {
  double end = 0.0;
  for (const TraceEvent& ev : trace) end = std::max(end, ev.time);
  return end;
}

}  // namespace grpolab
