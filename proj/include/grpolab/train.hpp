#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "grpolab/config.hpp"
#include "grpolab/policy.hpp"
#include "grpolab/toyfix.hpp"

namespace grpolab {

struct EvalSummary {
  int n = 0;
  double c_rate = 0.0;        // surface rate
  double sc_rate = 0.0;       // strict compile-and-semantic rate
  double mean_steps = 0.0;
  std::vector<int> exit_counts;  // indexed by ExitReason
};

struct TrainResult {
  TabularPolicy policy;
  std::vector<std::string> metrics;  // one self-describing record per line
  EvalSummary final_eval;
};

// Config-driven training over the six experiment arms. Deterministic:
// identical config and seed give byte-identical metrics. When `traj_dump`
// is non-null, every update's rollout groups and loss are serialized for
// replay.
TrainResult run_training(const RunConfig& cfg,
                         const std::vector<ToyTask>& train_tasks,
                         const std::vector<ToyTask>& eval_tasks,
                         std::ostream* traj_dump = nullptr);

// Greedy hint-free evaluation on the frozen split. hint_visible is forced
// off regardless of configuration. Throws on an empty split.
EvalSummary run_eval(const TabularPolicy& policy,
                     const std::vector<ToyTask>& eval_tasks,
                     const RunConfig& cfg);

struct ReplayReport {
  bool ok = true;
  int updates_checked = 0;
  double max_loss_diff = 0.0;
  double max_advantage_diff = 0.0;
  std::string mismatch;  // first mismatch description, empty when ok
};

// Recomputes masks, weights, advantages, and losses from a trajectory dump
// and checks them against the stored values to 1e-9.
ReplayReport replay_dump(std::istream& dump);
ReplayReport replay_dump_file(const std::string& path);

std::string metrics_to_csv(const std::vector<std::string>& metrics_lines);

}  // namespace grpolab
