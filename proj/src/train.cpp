#include "grpolab/train.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "grpolab/distill.hpp"
#include "grpolab/governance.hpp"
#include "grpolab/process_credit.hpp"

namespace grpolab {

using json = nlohmann::ordered_json;

namespace {

constexpr int kNumExitReasons = 10;

json exit_counts_json(const std::vector<int>& counts) {
  json j = json::object();
  for (int r = 0; r < kNumExitReasons; ++r) {
    j[to_string(static_cast<ExitReason>(r))] = counts[static_cast<std::size_t>(r)];
  }
  return j;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

struct SettleOutcome {
  bool surface = false;
  bool semantic = false;  // ground-truth S && C
};

// Exit routing, reward settlement, and process scoring for one sampled
// trajectory. The judge draws from its own rng stream so that the sampling
// stream is identical across reward arms.
SettleOutcome settle_trajectory(Trajectory& traj, const ToyTask& task,
                                const RunConfig& cfg, std::mt19937_64& judge_rng) {
  SettleOutcome out;
  const Handling handling = route(traj.exit_reason);
  if (handling != Handling::Normal) {
    apply_routing(traj, handling);
    return out;
  }
  const Sequence final_seq = replay_final_sequence(traj, task);
  out.surface = surface_check(final_seq);
  const bool true_semantic = semantic_check(final_seq, task);
  out.semantic = out.surface && true_semantic;
  traj.compile_ok = out.surface;
  const SemanticVerdict verdict =
      out.surface ? run_judge(true_semantic, cfg.judge, judge_rng)
                  : SemanticVerdict::skipped;
  traj.reward = settle(cfg.reward_scheme, out.surface, verdict);
  if (out.surface) synthetic_step_scorer(traj, task);
  return out;
}

json trajectory_json(const Trajectory& traj) {
  return json::parse(serialize_trajectory(traj));
}

json vec_json(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json mask_json(const MaskVec& m) {
  return std::vector<int>(m.data(), m.data() + m.size());
}

Vec vec_from_json(const json& j) {
  const std::vector<double> v = j.get<std::vector<double>>();
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

}  // namespace

EvalSummary run_eval(const TabularPolicy& policy,
                     const std::vector<ToyTask>& eval_tasks,
                     const RunConfig& cfg) {
  if (eval_tasks.empty()) throw std::invalid_argument("empty eval split");
  EvalSummary summary;
  summary.exit_counts.assign(kNumExitReasons, 0);
  std::mt19937_64 rng(0);  // greedy decoding draws nothing
  SampleOptions opts;
  opts.max_steps = cfg.limit_max_steps;
  opts.greedy = true;
  opts.hint_visible = false;  // hints are never available at evaluation
  for (const ToyTask& task : eval_tasks) {
    const Trajectory traj = sample_trajectory(policy, task, opts, rng);
    const Sequence final_seq = replay_final_sequence(traj, task);
    const bool c = surface_check(final_seq);
    const bool s = c && semantic_check(final_seq, task);
    summary.c_rate += c;
    summary.sc_rate += s;
    summary.mean_steps += static_cast<double>(traj.steps.size());
    ++summary.exit_counts[static_cast<std::size_t>(traj.exit_reason)];
    ++summary.n;
  }
  summary.c_rate /= summary.n;
  summary.sc_rate /= summary.n;
  summary.mean_steps /= summary.n;
  return summary;
}

TrainResult run_training(const RunConfig& cfg,
                         const std::vector<ToyTask>& train_tasks,
                         const std::vector<ToyTask>& eval_tasks,
                         std::ostream* traj_dump) {
  if (train_tasks.empty() || eval_tasks.empty()) {
    throw std::invalid_argument("task splits must be non-empty");
  }
  const int len = static_cast<int>(train_tasks.front().initial.size());
  for (const ToyTask& t : train_tasks) {
    if (static_cast<int>(t.initial.size()) != len) {
      throw std::invalid_argument("mixed task lengths in the train split");
    }
  }
  TabularPolicy policy(action_vocab(len));
  const TabularPolicy reference = policy;  // frozen KL anchor
  std::mt19937_64 rng(cfg.train_seed);

  TrainResult result;
  if (traj_dump) {
    json header;
    header["kind"] = "header";
    header["scheme"] = to_string(cfg.reward_scheme);
    header["process_scores"] = cfg.process_scores_enabled;
    header["clip"] = {{"eps_lo", cfg.clip.eps_lo},
                      {"eps_hi", cfg.clip.eps_hi},
                      {"kl_coef", cfg.clip.kl_coef},
                      {"entropy_coef", cfg.clip.entropy_coef},
                      {"degeneracy_eps", cfg.clip.degeneracy_eps}};
    *traj_dump << header.dump() << '\n';
  }

  const bool per_token_mode =
      cfg.distill.mode != DistillModeKind::off &&
      cfg.distill_kl.aggregation == KlAggregation::per_token_in_advantage;

  for (int update = 1; update <= cfg.train_steps; ++update) {
    std::mt19937_64 judge_rng(mix_seed(cfg.train_seed, static_cast<std::uint64_t>(update)));
    std::vector<RolloutGroup> groups;
    std::vector<std::vector<Vec>> weights;
    std::vector<std::vector<Vec>> offsets;

    double sum_reward = 0.0;
    int tier0 = 0, tier05 = 0, tier1 = 0;
    int surface_hits = 0, semantic_hits = 0;
    int finish_no_compile = 0;
    long total_steps = 0;
    int sampled = 0;
    std::vector<int> exit_counts(kNumExitReasons, 0);

    SampleOptions opts;
    opts.max_steps = cfg.limit_max_steps;
    opts.hint_visible = cfg.distill.mode == DistillModeKind::pi_distill;
    opts.record_teacher_context = cfg.distill.mode == DistillModeKind::opsd;

    for (const ToyTask& task : train_tasks) {
      RolloutGroup group;
      group.prompt_id = task.id;
      for (int k = 0; k < cfg.grpo_k; ++k) {
        Trajectory traj = sample_trajectory(policy, task, opts, rng, &reference);
        const SettleOutcome outcome =
            settle_trajectory(traj, task, cfg, judge_rng);
        const double r_env = traj.reward;
        surface_hits += outcome.surface;
        semantic_hits += outcome.semantic;
        finish_no_compile += finished_without_compile(traj);
        total_steps += static_cast<long>(traj.steps.size());
        ++exit_counts[static_cast<std::size_t>(traj.exit_reason)];
        if (r_env == 0.0) ++tier0;
        else if (r_env == 1.0) ++tier1;
        else ++tier05;
        if (cfg.distill.mode != DistillModeKind::off && !per_token_mode &&
            route(traj.exit_reason) == Handling::Normal) {
          const double kl =
              std::get<double>(masked_kl(traj, policy, cfg.distill_kl));
          traj.reward = cfg.distill.mode == DistillModeKind::opsd
                            ? shape_reward_opsd(r_env, kl, cfg.distill_kl.beta)
                            : shape_reward_pidistill(r_env, kl, cfg.distill_kl.beta);
        }
        sum_reward += traj.reward;
        ++sampled;
        group.trajectories.push_back(std::move(traj));
      }
      settle_advantages(group, cfg.clip.degeneracy_eps);

      if (cfg.distill.mode == DistillModeKind::pi_distill) {
        // batch expansion: copies share reward and advantage
        RolloutGroup expanded;
        expanded.prompt_id = group.prompt_id;
        const Eigen::Index k2 = 2 * static_cast<Eigen::Index>(group.trajectories.size());
        expanded.rewards.resize(k2);
        expanded.advantages.resize(k2);
        for (std::size_t k = 0; k < group.trajectories.size(); ++k) {
          ExpandedPair pair = expand_batch(group.trajectories[k], cfg.distill);
          const Eigen::Index i = static_cast<Eigen::Index>(2 * k);
          expanded.rewards[i] = expanded.rewards[i + 1] =
              group.rewards[static_cast<Eigen::Index>(k)];
          expanded.advantages[i] = expanded.advantages[i + 1] =
              group.advantages[static_cast<Eigen::Index>(k)];
          expanded.trajectories.push_back(std::move(pair.student));
          expanded.trajectories.push_back(std::move(pair.teacher));
        }
        group = std::move(expanded);
      }

      std::vector<Vec> group_weights;
      std::vector<Vec> group_offsets;
      for (std::size_t k = 0; k < group.trajectories.size(); ++k) {
        Trajectory& traj = group.trajectories[k];
        refresh_current_logps(traj, policy);
        group_weights.push_back(trajectory_token_weights(
            traj, group.advantages[static_cast<Eigen::Index>(k)],
            cfg.process_scores_enabled));
        if (per_token_mode) {
          const Vec kls = std::get<Vec>(masked_kl(traj, policy, cfg.distill_kl));
          group_offsets.push_back(-cfg.distill_kl.beta * kls);
        }
      }
      weights.push_back(std::move(group_weights));
      if (per_token_mode) offsets.push_back(std::move(group_offsets));
      groups.push_back(std::move(group));
    }

    TabularPolicy::Table grad;
    const LossReport report =
        grpo_loss(groups, weights, cfg.clip, &policy, &grad,
                  per_token_mode ? &offsets : nullptr);
    const double grad_norm = grad_table_norm(grad);
    policy.axpy(-cfg.train_lr, grad);

    json rec;
    rec["kind"] = "train";
    rec["update"] = update;
    rec["loss"] = report.loss;
    rec["pg"] = report.pg;
    rec["kl"] = report.kl;
    rec["grad_norm"] = grad_norm;
    rec["entropy"] = report.entropy;
    rec["mean_reward"] = sum_reward / sampled;
    rec["r0"] = static_cast<double>(tier0) / sampled;
    rec["r05"] = static_cast<double>(tier05) / sampled;
    rec["r1"] = static_cast<double>(tier1) / sampled;
    rec["surface_rate"] = static_cast<double>(surface_hits) / sampled;
    rec["semantic_rate"] = static_cast<double>(semantic_hits) / sampled;
    rec["mean_steps"] = static_cast<double>(total_steps) / sampled;
    rec["finish_no_compile"] = static_cast<double>(finish_no_compile) / sampled;
    rec["exits"] = exit_counts_json(exit_counts);
    result.metrics.push_back(rec.dump());

    if (traj_dump) {
      json dump;
      dump["kind"] = "update";
      dump["update"] = update;
      dump["loss"] = report.loss;
      json jgroups = json::array();
      for (std::size_t g = 0; g < groups.size(); ++g) {
        json jg;
        jg["prompt_id"] = groups[g].prompt_id;
        jg["rewards"] = vec_json(groups[g].rewards);
        jg["advantages"] = vec_json(groups[g].advantages);
        json trajs = json::array();
        json masks = json::array();
        json ws = json::array();
        for (std::size_t k = 0; k < groups[g].trajectories.size(); ++k) {
          trajs.push_back(trajectory_json(groups[g].trajectories[k]));
          masks.push_back(mask_json(effective_mask(groups[g].trajectories[k])));
          ws.push_back(vec_json(weights[g][k]));
        }
        jg["trajectories"] = std::move(trajs);
        jg["masks"] = std::move(masks);
        jg["weights"] = std::move(ws);
        if (per_token_mode) {
          json offs = json::array();
          for (const Vec& o : offsets[g]) offs.push_back(vec_json(o));
          jg["offsets"] = std::move(offs);
        }
        jgroups.push_back(std::move(jg));
      }
      dump["groups"] = std::move(jgroups);
      *traj_dump << dump.dump() << '\n';
    }

    if (update % cfg.eval_interval == 0 || update == cfg.train_steps) {
      const EvalSummary eval = run_eval(policy, eval_tasks, cfg);
      json erec;
      erec["kind"] = "eval";
      erec["update"] = update;
      erec["c_rate"] = eval.c_rate;
      erec["sc_rate"] = eval.sc_rate;
      erec["mean_steps"] = eval.mean_steps;
      erec["exits"] = exit_counts_json(eval.exit_counts);
      result.metrics.push_back(erec.dump());
      if (update == cfg.train_steps) result.final_eval = eval;
    }
  }
  result.policy = std::move(policy);
  return result;
}

ReplayReport replay_dump(std::istream& dump) {
  ReplayReport report;
  std::string line;
  if (!std::getline(dump, line)) {
    report.ok = false;
    report.mismatch = "empty dump";
    return report;
  }
  json header = json::parse(line);
  if (header.value("kind", "") != "header") {
    report.ok = false;
    report.mismatch = "missing header record";
    return report;
  }
  ClipConfig clip;
  clip.eps_lo = header.at("clip").at("eps_lo").get<double>();
  clip.eps_hi = header.at("clip").at("eps_hi").get<double>();
  clip.kl_coef = header.at("clip").at("kl_coef").get<double>();
  clip.entropy_coef = header.at("clip").at("entropy_coef").get<double>();
  clip.degeneracy_eps = header.at("clip").at("degeneracy_eps").get<double>();
  const bool process_enabled = header.at("process_scores").get<bool>();
  constexpr double kTol = 1e-9;

  while (std::getline(dump, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.value("kind", "") != "update") continue;
    std::vector<RolloutGroup> groups;
    std::vector<std::vector<Vec>> weights;
    std::vector<std::vector<Vec>> offsets;
    bool any_offsets = false;
    for (const json& jg : j.at("groups")) {
      RolloutGroup group;
      group.prompt_id = jg.at("prompt_id").get<std::string>();
      group.rewards = vec_from_json(jg.at("rewards"));
      const Vec stored_adv = vec_from_json(jg.at("advantages"));
      // Batch-expanded groups store pairwise-duplicated rewards; duplication
      // preserves the mean and population std, so recomputing from the
      // stored vector is exact in both layouts.
      const Vec recomputed = group_advantages(group.rewards, clip.degeneracy_eps);
      for (Eigen::Index i = 0; i < stored_adv.size(); ++i) {
        report.max_advantage_diff = std::max(
            report.max_advantage_diff, std::abs(recomputed[i] - stored_adv[i]));
      }
      group.advantages = stored_adv;

      std::vector<Vec> group_weights;
      std::vector<Vec> group_offsets;
      const json& jtrajs = jg.at("trajectories");
      const json& jmasks = jg.at("masks");
      const json& jws = jg.at("weights");
      for (std::size_t k = 0; k < jtrajs.size(); ++k) {
        Trajectory traj = deserialize_trajectory(jtrajs[k].dump());
        const MaskVec mask = effective_mask(traj);
        const std::vector<int> stored_mask = jmasks[k].get<std::vector<int>>();
        for (int t = 0; t < traj.token_count(); ++t) {
          if (stored_mask[static_cast<std::size_t>(t)] != mask[t]) {
            report.ok = false;
            if (report.mismatch.empty()) {
              report.mismatch = "mask mismatch in " + group.prompt_id +
                                " trajectory " + std::to_string(k) + " at token " +
                                std::to_string(t);
            }
          }
        }
        const Vec w = trajectory_token_weights(
            traj, group.advantages[static_cast<Eigen::Index>(k)], process_enabled);
        const Vec stored_w = vec_from_json(jws[k]);
        for (int t = 0; t < traj.token_count(); ++t) {
          if (std::abs(w[t] - stored_w[t]) > kTol) {
            report.ok = false;
            if (report.mismatch.empty()) {
              report.mismatch = "weight mismatch in " + group.prompt_id +
                                " trajectory " + std::to_string(k) + " at token " +
                                std::to_string(t);
            }
          }
        }
        if (jg.contains("offsets")) {
          group_offsets.push_back(vec_from_json(jg.at("offsets")[k]));
          any_offsets = true;
        }
        group_weights.push_back(w);
        group.trajectories.push_back(std::move(traj));
      }
      weights.push_back(std::move(group_weights));
      offsets.push_back(std::move(group_offsets));
      groups.push_back(std::move(group));
    }
    const LossReport loss = grpo_loss(groups, weights, clip, nullptr, nullptr,
                                      any_offsets ? &offsets : nullptr);
    const double stored_loss = j.at("loss").get<double>();
    report.max_loss_diff =
        std::max(report.max_loss_diff, std::abs(loss.loss - stored_loss));
    ++report.updates_checked;
  }
  if (report.max_loss_diff > kTol || report.max_advantage_diff > kTol) {
    report.ok = false;
    if (report.mismatch.empty()) report.mismatch = "recomputed loss/advantage drift";
  }
  return report;
}

ReplayReport replay_dump_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory dump: " + path);
  return replay_dump(in);
}

std::string metrics_to_csv(const std::vector<std::string>& metrics_lines) {
  static const char* kCols[] = {"update", "loss", "pg", "kl", "grad_norm",
                                "entropy", "mean_reward", "r0", "r05", "r1",
                                "surface_rate", "semantic_rate", "mean_steps",
                                "finish_no_compile"};
  std::ostringstream out;
  for (std::size_t i = 0; i < std::size(kCols); ++i) {
    out << (i ? "," : "") << kCols[i];
  }
  out << '\n';
  for (const std::string& line : metrics_lines) {
    json j = json::parse(line);
    if (j.value("kind", "") != "train") continue;
    for (std::size_t i = 0; i < std::size(kCols); ++i) {
      if (i) out << ',';
      out << j.at(kCols[i]).dump();
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace grpolab
