#pragma once

#include <map>
#include <string>

#include "grpolab/distill.hpp"
#include "grpolab/grpo.hpp"
#include "grpolab/reward.hpp"
#include "grpolab/scheduler.hpp"

namespace grpolab {

// Line-oriented "key = value" files with dotted keys; '#' starts a comment.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

struct RunConfig {
  RewardScheme reward_scheme = RewardScheme::layered;
  JudgeConfig judge;
  bool process_scores_enabled = false;

  DistillMode distill;
  KlConfig distill_kl;

  int grpo_k = 4;
  ClipConfig clip;

  PoolConfig pools;
  int limit_max_steps = 12;

  int task_len = 5;
  double train_lr = 20.0;
  int train_steps = 300;
  int eval_interval = 20;
  std::uint64_t train_seed = 1;

  std::string train_tasks;  // task file paths
  std::string eval_tasks;
};

// Builds a RunConfig from dotted keys and validates it (task files exist,
// disjoint splits, ranges); throws std::invalid_argument on inconsistency.
RunConfig run_config_from(const KeyValueConfig& cfg);

}  // namespace grpolab
