#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "grpolab/config.hpp"
#include "grpolab/stats.hpp"
#include "grpolab/toyfix.hpp"
#include "grpolab/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

grpolab::RunConfig load_run_config(const std::string& config_path,
                                   std::optional<std::uint64_t> seed) {
  grpolab::KeyValueConfig kv = config_path.empty()
                                   ? grpolab::KeyValueConfig{}
                                   : grpolab::KeyValueConfig::parse_file(config_path);
  if (seed) kv.set("train.seed", std::to_string(*seed));
  return grpolab::run_config_from(kv);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

json eval_json(const grpolab::EvalSummary& s) {
  json exits = json::object();
  for (std::size_t r = 0; r < s.exit_counts.size(); ++r) {
    exits[grpolab::to_string(static_cast<grpolab::ExitReason>(r))] =
        s.exit_counts[r];
  }
  return json{{"n", s.n},
              {"c_rate", s.c_rate},
              {"sc_rate", s.sc_rate},
              {"mean_steps", s.mean_steps},
              {"exits", exits}};
}

// Lines of "judge<sep>human" with 0/1 labels; separator is any of
// comma, semicolon, tab, or spaces.
std::vector<std::pair<bool, bool>> load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pair file: " + path);
  std::vector<std::pair<bool, bool>> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    }
    std::istringstream row(line);
    int judge = -1, human = -1;
    if (!(row >> judge)) continue;  // blank line
    if (!(row >> human) || judge < 0 || judge > 1 || human < 0 || human > 1) {
      throw std::runtime_error("pair file line " + std::to_string(lineno) +
                               ": expected two 0/1 labels");
    }
    pairs.emplace_back(judge == 1, human == 1);
  }
  return pairs;
}

int cmd_gen_tasks(const fs::path& out_dir, std::uint64_t seed, int n_train,
                  int n_eval, int len) {
  fs::create_directories(out_dir);
  // one stream, deduplicated on (initial, gt) so the splits stay disjoint
  std::mt19937_64 rng(seed);
  std::set<std::string> seen;
  std::vector<grpolab::ToyTask> all;
  while (static_cast<int>(all.size()) < n_train + n_eval) {
    grpolab::ToyTask task = grpolab::generate_task(len, rng);
    const std::string key = grpolab::sequence_to_string(task.initial) + "->" +
                            grpolab::sequence_to_string(task.gt);
    if (!seen.insert(key).second) continue;
    task.id = "task-" + std::to_string(seed) + "-" + std::to_string(all.size());
    all.push_back(std::move(task));
  }
  std::vector<grpolab::ToyTask> train(all.begin(), all.begin() + n_train);
  std::vector<grpolab::ToyTask> eval(all.begin() + n_train, all.end());
  grpolab::save_tasks(train, (out_dir / "train_tasks.jsonl").string());
  grpolab::save_tasks(eval, (out_dir / "eval_tasks.jsonl").string());
  std::cout << "wrote " << train.size() << " train and " << eval.size()
            << " eval tasks to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const fs::path& out_dir, bool dump) {
  const grpolab::RunConfig cfg = load_run_config(config_path, seed);
  if (cfg.train_tasks.empty()) {
    throw std::runtime_error("config must set data.train_tasks and data.eval_tasks");
  }
  const std::vector<grpolab::ToyTask> train = grpolab::load_tasks(cfg.train_tasks);
  const std::vector<grpolab::ToyTask> eval = grpolab::load_tasks(cfg.eval_tasks);

  fs::create_directories(out_dir);
  std::ofstream dump_stream;
  if (dump) {
    dump_stream.open(out_dir / "trajectories.jsonl");
    if (!dump_stream) throw std::runtime_error("cannot write trajectory dump");
  }
  const grpolab::TrainResult result =
      grpolab::run_training(cfg, train, eval, dump ? &dump_stream : nullptr);

  std::ostringstream metrics;
  for (const std::string& line : result.metrics) metrics << line << '\n';
  write_file(out_dir / "metrics.jsonl", metrics.str());
  write_file(out_dir / "metrics.csv", grpolab::metrics_to_csv(result.metrics));
  write_file(out_dir / "policy.json", result.policy.serialize());
  std::cout << eval_json(result.final_eval).dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& policy_path,
             const fs::path& out_dir) {
  const grpolab::RunConfig cfg = load_run_config(config_path, std::nullopt);
  if (cfg.eval_tasks.empty()) {
    throw std::runtime_error("config must set data.eval_tasks");
  }
  std::ifstream in(policy_path);
  if (!in) throw std::runtime_error("cannot open policy file: " + policy_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const grpolab::TabularPolicy policy = grpolab::TabularPolicy::deserialize(buf.str());
  const grpolab::EvalSummary summary =
      grpolab::run_eval(policy, grpolab::load_tasks(cfg.eval_tasks), cfg);
  const std::string text = eval_json(summary).dump();
  std::cout << text << "\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file(out_dir / "eval.json", text + "\n");
  }
  return 0;
}

int cmd_replay(const std::string& dump_path) {
  const grpolab::ReplayReport report = grpolab::replay_dump_file(dump_path);
  json j{{"ok", report.ok},
         {"updates_checked", report.updates_checked},
         {"max_loss_diff", report.max_loss_diff},
         {"max_advantage_diff", report.max_advantage_diff}};
  if (!report.mismatch.empty()) j["mismatch"] = report.mismatch;
  std::cout << j.dump() << "\n";
  return report.ok ? 0 : 1;
}

int cmd_audit_stats(const std::string& pairs_path, double sens, double spec,
                    std::optional<double> p_obs, int resamples,
                    std::uint64_t seed, double z) {
  const auto pairs = load_pairs(pairs_path);
  const grpolab::AuditTable table = grpolab::table_from_labels(pairs);
  const grpolab::ConfusionMetrics m = grpolab::confusion_metrics(table);
  const double kappa = grpolab::cohen_kappa(table);
  const auto agreement_ci =
      grpolab::wilson_ci(table.tp + table.tn, table.total(), z);
  const auto kappa_ci = grpolab::bootstrap_kappa_ci(pairs, resamples, seed);

  json j;
  j["counts"] = {{"tp", table.tp}, {"fp", table.fp}, {"fn", table.fn}, {"tn", table.tn}};
  j["agreement"] = m.agreement;
  j["agreement_wilson"] = {agreement_ci.first, agreement_ci.second};
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["kappa"] = kappa;
  j["kappa_bootstrap"] = {kappa_ci.first, kappa_ci.second};
  if (table.fp + table.fn > 0) {
    const auto [chi2, p] = grpolab::mcnemar(table.fp, table.fn);
    j["mcnemar_chi2"] = chi2;
    j["mcnemar_p"] = p;
  }
  if (p_obs) {
    j["judge_sensitivity"] = sens;
    j["judge_specificity"] = spec;
    j["corrected_rate"] = grpolab::rogan_gladen(*p_obs, sens, spec);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-feedback repair-agent training laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  bool seed_given = false;

  auto* gen = app.add_subcommand("gen-tasks", "Generate disjoint task splits");
  int n_train = 64, n_eval = 32, len = 5;
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--seed", seed, "generation seed");
  gen->add_option("--num-tasks,--train", n_train, "train task count");
  gen->add_option("--num-eval,--eval", n_eval, "eval task count");
  gen->add_option("--len", len, "sequence length");

  auto* train = app.add_subcommand("train", "Run one training arm");
  bool dump = false;
  train->add_option("--config", config_path, "run config file")->required();
  train->add_option("--seed", seed, "seed override")
      ->each([&](const std::string&) { seed_given = true; });
  train->add_option("--out", out_dir, "output directory");
  train->add_flag("--dump", dump, "write a replayable trajectory dump");

  auto* eval = app.add_subcommand("eval", "Evaluate a saved policy");
  std::string policy_path;
  std::string eval_out;
  eval->add_option("--config", config_path, "run config file")->required();
  eval->add_option("--policy", policy_path, "policy table file")->required();
  eval->add_option("--out", eval_out, "optional output directory");

  auto* replay = app.add_subcommand("replay", "Recompute losses from a dump");
  std::string dump_path;
  replay->add_option("--dump", dump_path, "trajectory dump file")->required();

  auto* audit = app.add_subcommand("audit-stats", "Judge-reliability statistics");
  std::string pairs_path;
  double sens = 0.917, spec = 0.885, z = 1.96;
  std::optional<double> p_obs;
  int resamples = 10000;
  audit->add_option("--pairs", pairs_path, "judge/human label pair file")->required();
  audit->add_option("--sens", sens, "judge sensitivity for rate correction");
  audit->add_option("--spec", spec, "judge specificity for rate correction");
  audit->add_option("--observed-rate", [&](const std::vector<std::string>& v) {
    p_obs = std::stod(v.back());
    return true;
  }, "observed consistency rate to bias-correct");
  audit->add_option("--resamples", resamples, "bootstrap resamples");
  audit->add_option("--seed", seed, "bootstrap seed");
  audit->add_option("--z", z, "normal quantile for the Wilson interval");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_tasks(out_dir, seed, n_train, n_eval, len);
    if (train->parsed()) {
      return cmd_train(config_path,
                       seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt,
                       out_dir, dump);
    }
    if (eval->parsed()) return cmd_eval(config_path, policy_path, eval_out);
    if (replay->parsed()) return cmd_replay(dump_path);
    if (audit->parsed()) {
      return cmd_audit_stats(pairs_path, sens, spec, p_obs, resamples, seed, z);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
