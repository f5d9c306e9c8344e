#include "grpolab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "grpolab/toyfix.hpp"

namespace grpolab {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    }
    cfg.entries_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

bool KeyValueConfig::has(const std::string& key) const {
  return entries_.count(key) > 0;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::size_t pos = 0;
  const double v = std::stod(it->second, &pos);
  if (pos != it->second.size()) {
    throw std::invalid_argument("config key " + key + ": not a number");
  }
  return v;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::size_t pos = 0;
  const int v = std::stoi(it->second, &pos);
  if (pos != it->second.size()) {
    throw std::invalid_argument("config key " + key + ": not an integer");
  }
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::invalid_argument("config key " + key + ": not a boolean");
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

RunConfig run_config_from(const KeyValueConfig& cfg) {
  RunConfig run;
  run.reward_scheme =
      reward_scheme_from_string(cfg.get_string("reward.scheme", "layered"));
  run.judge.sensitivity = cfg.get_double("reward.judge_sensitivity", 1.0);
  run.judge.specificity = cfg.get_double("reward.judge_specificity", 1.0);
  run.judge.retries = cfg.get_int("reward.judge_retries", 2);
  run.judge.fault_rate = cfg.get_double("reward.judge_fault_rate", 0.0);
  run.process_scores_enabled = cfg.get_bool("process_scores.enabled", false);

  const std::string mode = cfg.get_string("distill.mode", "off");
  if (mode == "off") run.distill.mode = DistillModeKind::off;
  else if (mode == "pi_distill") run.distill.mode = DistillModeKind::pi_distill;
  else if (mode == "opsd") run.distill.mode = DistillModeKind::opsd;
  else throw std::invalid_argument("unknown distill.mode: " + mode);
  run.distill.alpha = cfg.get_double("distill.alpha", 0.5);
  run.distill_kl.beta = cfg.get_double(
      "distill.beta", run.distill.mode == DistillModeKind::pi_distill ? 0.01 : 0.02);
  run.distill_kl.aggregation =
      kl_aggregation_from_string(cfg.get_string("distill.aggregation", "masked_sum"));
  if (cfg.has("distill.topk")) run.distill_kl.topk = cfg.get_int("distill.topk", 32);
  run.distill_kl.direction = run.distill.mode == DistillModeKind::pi_distill
                                 ? KlDirection::teacher_to_student
                                 : KlDirection::student_to_teacher;

  run.grpo_k = cfg.get_int("grpo.k", 4);
  run.clip.eps_lo = cfg.get_double("grpo.eps_lo", 0.2);
  run.clip.eps_hi = cfg.get_double("grpo.eps_hi", 0.28);
  run.clip.kl_coef = cfg.get_double("grpo.kl_coef", 0.01);
  run.clip.entropy_coef = cfg.get_double("grpo.entropy_coef", 0.0);
  run.clip.degeneracy_eps = cfg.get_double("grpo.degeneracy_eps", 1e-8);

  run.pools.inference_cap = cfg.get_int("pools.inference_cap", 4);
  run.pools.sandbox_cap = cfg.get_int("pools.sandbox_cap", 4);
  run.pools.compile_cap = cfg.get_int("pools.compile_cap", 2);
  run.pools.compile_timeout_threshold =
      cfg.get_int("pools.compile_timeout_threshold", 2);
  run.limit_max_steps = cfg.get_int("limits.max_steps", 12);

  run.task_len = cfg.get_int("data.task_len", 5);
  // tabular logits see batch-mean gradients with norms around 1e-2, so the
  // useful constant-step range sits orders of magnitude above typical
  // neural-net values
  run.train_lr = cfg.get_double("train.lr", 20.0);
  run.train_steps = cfg.get_int("train.steps", 300);
  run.eval_interval = cfg.get_int("train.eval_interval", 20);
  run.train_seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 1));
  run.train_tasks = cfg.get_string("data.train_tasks", "");
  run.eval_tasks = cfg.get_string("data.eval_tasks", "");

  if (run.grpo_k < 2) throw std::invalid_argument("grpo.k must be >= 2");
  if (run.clip.eps_lo <= 0.0 || run.clip.eps_hi <= 0.0) {
    throw std::invalid_argument("clip bounds must be positive");
  }
  if (run.distill.alpha < 0.0 || run.distill.alpha > 1.0) {
    throw std::invalid_argument("distill.alpha outside [0,1]");
  }
  if (run.train_steps < 1 || run.eval_interval < 1 || run.train_lr <= 0.0) {
    throw std::invalid_argument("invalid training schedule");
  }
  if (run.limit_max_steps < 1) throw std::invalid_argument("limits.max_steps >= 1");

  if (!run.train_tasks.empty() || !run.eval_tasks.empty()) {
    if (run.train_tasks.empty() || run.eval_tasks.empty()) {
      throw std::invalid_argument("both data.train_tasks and data.eval_tasks are required");
    }
    const std::vector<ToyTask> train = load_tasks(run.train_tasks);
    const std::vector<ToyTask> eval = load_tasks(run.eval_tasks);
    if (train.empty() || eval.empty()) {
      throw std::invalid_argument("task splits must be non-empty");
    }
    std::set<std::string> seen;
    for (const ToyTask& t : train) {
      seen.insert(sequence_to_string(t.initial) + "->" + sequence_to_string(t.gt));
    }
    for (const ToyTask& t : eval) {
      if (seen.count(sequence_to_string(t.initial) + "->" +
                     sequence_to_string(t.gt))) {
        throw std::invalid_argument("eval split overlaps the train split");
      }
    }
  }
  return run;
}

}  // namespace grpolab
