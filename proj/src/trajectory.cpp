#include "grpolab/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>

namespace grpolab {

using json = nlohmann::ordered_json;

const char* to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::view: return "view";
    case ActionKind::edit: return "edit";
    case ActionKind::compile: return "compile";
    case ActionKind::finish: return "finish";
    case ActionKind::other: return "other";
  }
  return "other";
}

ActionKind action_kind_from_string(const std::string& s) {
  if (s == "view") return ActionKind::view;
  if (s == "edit") return ActionKind::edit;
  if (s == "compile") return ActionKind::compile;
  if (s == "finish") return ActionKind::finish;
  if (s == "other") return ActionKind::other;
  throw std::invalid_argument("unknown action kind: " + s);
}

const char* to_string(ExitReason reason) {
  switch (reason) {
    case ExitReason::finish_called: return "finish_called";
    case ExitReason::max_steps: return "max_steps";
    case ExitReason::no_tool_call_stop: return "no_tool_call_stop";
    case ExitReason::context_limit: return "context_limit";
    case ExitReason::abort_generation: return "abort";
    case ExitReason::max_tokens: return "max_tokens";
    case ExitReason::catastrophic_repetition: return "catastrophic_repetition";
    case ExitReason::excessive_tool_calls: return "excessive_tool_calls";
    case ExitReason::consecutive_compile_timeouts:
      return "consecutive_compile_timeouts";
    case ExitReason::environment_setup_failed:
      return "environment_setup_failed";
  }
  return "no_tool_call_stop";
}

ExitReason exit_reason_from_string(const std::string& s) {
  static const std::pair<const char*, ExitReason> table[] = {
      {"finish_called", ExitReason::finish_called},
      {"max_steps", ExitReason::max_steps},
      {"no_tool_call_stop", ExitReason::no_tool_call_stop},
      {"context_limit", ExitReason::context_limit},
      {"abort", ExitReason::abort_generation},
      {"max_tokens", ExitReason::max_tokens},
      {"catastrophic_repetition", ExitReason::catastrophic_repetition},
      {"excessive_tool_calls", ExitReason::excessive_tool_calls},
      {"consecutive_compile_timeouts", ExitReason::consecutive_compile_timeouts},
      {"environment_setup_failed", ExitReason::environment_setup_failed},
  };
  for (const auto& [name, reason] : table) {
    if (s == name) return reason;
  }
  throw std::invalid_argument("unknown exit reason: " + s);
}

MaskVec build_mask(const Trajectory& traj) {
  MaskVec mask(traj.token_count());
  for (int t = 0; t < traj.token_count(); ++t) {
    mask[t] = traj.tokens[static_cast<size_t>(t)].role_flag ? 1 : 0;
  }
  return mask;
}

MaskVec effective_mask(const Trajectory& traj) {
  MaskVec mask = build_mask(traj);
  if (traj.loss_mask_override) {
    const MaskVec& ov = *traj.loss_mask_override;
    if (ov.size() != mask.size()) {
      throw std::invalid_argument("loss_mask_override length mismatch");
    }
    mask = mask.cwiseProduct(ov);
  }
  return mask;
}

std::vector<int> step_token_counts(const Trajectory& traj) {
  std::vector<int> counts;
  counts.reserve(traj.steps.size());
  for (const StepRecord& step : traj.steps) {
    int n = 0;
    for (int t = step.assistant_begin; t < step.assistant_end; ++t) {
      if (t < 0 || t >= traj.token_count()) {
        throw std::invalid_argument("assistant span out of range");
      }
      if (traj.tokens[static_cast<size_t>(t)].role_flag) ++n;
    }
    if (n != step.assistant_tokens) {
      throw std::invalid_argument("step assistant_tokens disagrees with role flags");
    }
    counts.push_back(n);
  }
  return counts;
}

void validate_trajectory(const Trajectory& traj) {
  std::vector<int> owner(traj.tokens.size(), -1);
  for (size_t i = 0; i < traj.steps.size(); ++i) {
    const StepRecord& step = traj.steps[i];
    for (int t = step.assistant_begin; t < step.assistant_end; ++t) {
      if (t < 0 || t >= traj.token_count() || owner[static_cast<size_t>(t)] != -1) {
        throw std::invalid_argument("step spans do not partition tokens");
      }
      owner[static_cast<size_t>(t)] = static_cast<int>(i);
    }
    for (int t = step.echo_begin; t < step.echo_end; ++t) {
      if (t < 0 || t >= traj.token_count() || owner[static_cast<size_t>(t)] != -1) {
        throw std::invalid_argument("step spans do not partition tokens");
      }
      owner[static_cast<size_t>(t)] = static_cast<int>(i);
    }
    if (step.process_score &&
        (*step.process_score < 0.0 || *step.process_score > 1.0)) {
      throw std::invalid_argument("process score outside [0,1]");
    }
  }
  int prev_step = 0;
  for (size_t t = 0; t < traj.tokens.size(); ++t) {
    if (owner[t] == -1) {
      throw std::invalid_argument("token not covered by any step");
    }
    if (owner[t] != traj.tokens[t].step_index) {
      throw std::invalid_argument("token step_index disagrees with spans");
    }
    if (traj.tokens[t].step_index < prev_step) {
      throw std::invalid_argument("step_index decreases along the token stream");
    }
    prev_step = traj.tokens[t].step_index;
  }
  if (traj.loss_mask_override &&
      traj.loss_mask_override->size() != traj.token_count()) {
    throw std::invalid_argument("loss_mask_override length mismatch");
  }
  step_token_counts(traj);
}

std::string serialize_trajectory(const Trajectory& traj) {
  json j;
  j["prompt_id"] = traj.prompt_id;
  j["exit_reason"] = to_string(traj.exit_reason);
  j["reward"] = traj.reward;
  j["compile_ok"] = traj.compile_ok;
  j["loss_weight"] = traj.loss_weight;
  json steps = json::array();
  for (const StepRecord& s : traj.steps) {
    json js;
    js["kind"] = to_string(s.kind);
    js["assistant_span"] = {s.assistant_begin, s.assistant_end};
    js["echo_span"] = {s.echo_begin, s.echo_end};
    js["n"] = s.assistant_tokens;
    if (s.process_score) js["score"] = *s.process_score;
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  json tokens = json::array();
  for (const TokenRecord& t : traj.tokens) {
    json jt;
    jt["id"] = t.token_id;
    jt["m"] = t.role_flag;
    jt["step"] = t.step_index;
    jt["ctx"] = t.context;
    if (!t.hint_free_context.empty()) jt["ctx_student"] = t.hint_free_context;
    if (!t.teacher_context.empty()) jt["ctx_teacher"] = t.teacher_context;
    jt["lp"] = t.logp_current;
    jt["lp_old"] = t.logp_old;
    jt["lp_ref"] = t.logp_ref;
    if (t.logp_teacher) jt["lp_teacher"] = *t.logp_teacher;
    tokens.push_back(std::move(jt));
  }
  j["tokens"] = std::move(tokens);
  if (traj.loss_mask_override) {
    std::vector<int> ov(traj.loss_mask_override->data(),
                        traj.loss_mask_override->data() +
                            traj.loss_mask_override->size());
    j["mask_override"] = ov;
  }
  return j.dump();
}

Trajectory deserialize_trajectory(const std::string& line) {
  json j = json::parse(line);
  Trajectory traj;
  traj.prompt_id = j.at("prompt_id").get<std::string>();
  traj.exit_reason = exit_reason_from_string(j.at("exit_reason").get<std::string>());
  traj.reward = j.at("reward").get<double>();
  traj.compile_ok = j.at("compile_ok").get<bool>();
  traj.loss_weight = j.value("loss_weight", 1.0);
  for (const json& js : j.at("steps")) {
    StepRecord s;
    s.kind = action_kind_from_string(js.at("kind").get<std::string>());
    s.assistant_begin = js.at("assistant_span")[0].get<int>();
    s.assistant_end = js.at("assistant_span")[1].get<int>();
    s.echo_begin = js.at("echo_span")[0].get<int>();
    s.echo_end = js.at("echo_span")[1].get<int>();
    s.assistant_tokens = js.at("n").get<int>();
    if (js.contains("score")) s.process_score = js.at("score").get<double>();
    traj.steps.push_back(std::move(s));
  }
  for (const json& jt : j.at("tokens")) {
    TokenRecord t;
    t.token_id = jt.at("id").get<int>();
    t.role_flag = jt.at("m").get<int>();
    t.step_index = jt.at("step").get<int>();
    t.context = jt.at("ctx").get<std::string>();
    t.hint_free_context = jt.value("ctx_student", std::string{});
    t.teacher_context = jt.value("ctx_teacher", std::string{});
    t.logp_current = jt.at("lp").get<double>();
    t.logp_old = jt.at("lp_old").get<double>();
    t.logp_ref = jt.at("lp_ref").get<double>();
    if (jt.contains("lp_teacher")) t.logp_teacher = jt.at("lp_teacher").get<double>();
    traj.tokens.push_back(std::move(t));
  }
  if (j.contains("mask_override")) {
    std::vector<int> ov = j.at("mask_override").get<std::vector<int>>();
    MaskVec m(static_cast<Eigen::Index>(ov.size()));
    for (size_t i = 0; i < ov.size(); ++i) m[static_cast<Eigen::Index>(i)] = ov[i];
    traj.loss_mask_override = std::move(m);
  }
  return traj;
}

}  // namespace grpolab
