#include "grpolab/toyfix.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "grpolab/governance.hpp"

namespace grpolab {

using json = nlohmann::ordered_json;

namespace {
constexpr char kSymbols[kAlphabet + 1] = "()abcd";

constexpr int kEchoViewBase = 1000;   // + observed symbol
constexpr int kEchoEditAck = 900;
constexpr int kEchoError = 902;
constexpr int kEchoCompileOk = 1100;  // + ok flag
constexpr int kEchoViolationBase = 1200;  // + position
}  // namespace

std::string sequence_to_string(const Sequence& seq) {
  std::string s;
  s.reserve(seq.size());
  for (int sym : seq) {
    if (sym < 0 || sym >= kAlphabet) throw std::invalid_argument("symbol out of range");
    s.push_back(kSymbols[sym]);
  }
  return s;
}

Sequence sequence_from_string(const std::string& s) {
  Sequence seq;
  seq.reserve(s.size());
  for (char c : s) {
    const char* pos = std::char_traits<char>::find(kSymbols, kAlphabet, c);
    if (!pos) throw std::invalid_argument("unknown symbol in sequence");
    seq.push_back(static_cast<int>(pos - kSymbols));
  }
  return seq;
}

bool surface_check(const Sequence& seq) { return !first_violation(seq).has_value(); }

std::optional<int> first_violation(const Sequence& seq) {
  int depth = 0;
  int last_open = -1;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] == kOpen) {
      ++depth;
      last_open = static_cast<int>(i);
    } else if (seq[i] == kClose) {
      if (depth == 0) return static_cast<int>(i);
      --depth;
    }
  }
  if (depth > 0) return last_open;
  return std::nullopt;
}

bool semantic_check(const Sequence& seq, const ToyTask& task) {
  if (seq.size() != task.gt.size()) return false;
  // delimiter skeleton must match exactly
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const bool gt_delim = task.gt[i] == kOpen || task.gt[i] == kClose;
    const bool seq_delim = seq[i] == kOpen || seq[i] == kClose;
    if (gt_delim != seq_delim) return false;
    if (gt_delim && seq[i] != task.gt[i]) return false;
  }
  // per-segment letter multisets must match
  std::size_t i = 0;
  while (i < seq.size()) {
    if (task.gt[i] == kOpen || task.gt[i] == kClose) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::vector<int> got, want;
    while (j < seq.size() && task.gt[j] != kOpen && task.gt[j] != kClose) {
      got.push_back(seq[j]);
      want.push_back(task.gt[j]);
      ++j;
    }
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    if (got != want) return false;
    i = j;
  }
  return true;
}

std::vector<Sequence> semantic_class_members(const ToyTask& task) {
  // segments of letter positions, separated by delimiters
  std::vector<std::pair<std::size_t, std::vector<int>>> segments;
  std::size_t i = 0;
  while (i < task.gt.size()) {
    if (task.gt[i] == kOpen || task.gt[i] == kClose) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::vector<int> letters;
    while (j < task.gt.size() && task.gt[j] != kOpen && task.gt[j] != kClose) {
      letters.push_back(task.gt[j]);
      ++j;
    }
    std::sort(letters.begin(), letters.end());
    segments.emplace_back(i, std::move(letters));
    i = j;
  }
  // cartesian product of distinct per-segment permutations
  std::vector<Sequence> acc{task.gt};
  for (auto& [start, letters] : segments) {
    std::vector<Sequence> next;
    std::vector<int> perm = letters;
    do {
      for (const Sequence& base : acc) {
        Sequence s = base;
        for (std::size_t k = 0; k < perm.size(); ++k) s[start + k] = perm[k];
        next.push_back(std::move(s));
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    acc = std::move(next);
  }
  std::sort(acc.begin(), acc.end());
  acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
  return acc;
}

int class_distance(const Sequence& seq, const ToyTask& task) {
  if (seq.size() != task.gt.size()) return static_cast<int>(task.gt.size()) + 1;
  int best = std::numeric_limits<int>::max();
  for (const Sequence& member : semantic_class_members(task)) {
    int d = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) d += seq[i] != member[i];
    best = std::min(best, d);
  }
  return best;
}

namespace {

bool next_sequence(Sequence& seq) {
  for (std::size_t i = seq.size(); i-- > 0;) {
    if (++seq[i] < kAlphabet) return true;
    seq[i] = 0;
  }
  return false;
}

void verify_weak_feedback(const ToyTask& task) {
  double space = 1.0;
  for (std::size_t i = 0; i < task.gt.size(); ++i) space *= kAlphabet;
  if (space > 1e4) {
    throw std::invalid_argument("task edit space exceeds the enumerable bound");
  }
  bool shortcut = false;
  Sequence seq(task.gt.size(), 0);
  do {
    const bool s = semantic_check(seq, task);
    const bool c = surface_check(seq);
    if (s && !c) throw std::logic_error("weak-feedback violation: S without C");
    if (c && !s) shortcut = true;
  } while (next_sequence(seq));
  if (!shortcut) {
    throw std::logic_error("task admits no surface-only shortcut");
  }
}

}  // namespace

ToyTask generate_task(int len, std::mt19937_64& rng) {
  if (len < 2) throw std::invalid_argument("task length must be >= 2");
  std::uniform_int_distribution<int> sym(0, kAlphabet - 1);
  std::uniform_int_distribution<int> pos(0, len - 1);
  ToyTask task;
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Sequence gt(static_cast<std::size_t>(len));
    for (int& s : gt) s = sym(rng);
    if (!surface_check(gt)) continue;
    if (std::count(gt.begin(), gt.end(), kOpen) == 0) continue;
    // corrupt 1-2 positions until the surface rule breaks
    Sequence initial;
    bool broken = false;
    for (int tries = 0; tries < 200 && !broken; ++tries) {
      initial = gt;
      const int edits = 1 + (rng() & 1);
      for (int e = 0; e < edits; ++e) {
        const int p = pos(rng);
        int s = sym(rng);
        while (s == initial[static_cast<std::size_t>(p)]) s = sym(rng);
        initial[static_cast<std::size_t>(p)] = s;
      }
      broken = !surface_check(initial);
    }
    if (!broken) continue;
    task.gt = std::move(gt);
    task.initial = std::move(initial);
    task.semantic_class = "seg_multiset:" + sequence_to_string(task.gt);
    verify_weak_feedback(task);
    return task;
  }
  throw std::runtime_error("task generation failed");
}

std::vector<ToyTask> generate_tasks(int count, int len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ToyTask> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    ToyTask task = generate_task(len, rng);
    task.id = "task-" + std::to_string(seed) + "-" + std::to_string(i);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

void save_tasks(const std::vector<ToyTask>& tasks, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open task file for writing: " + path);
  for (const ToyTask& t : tasks) {
    json j;
    j["id"] = t.id;
    j["initial"] = sequence_to_string(t.initial);
    j["gt"] = sequence_to_string(t.gt);
    j["surface_rule"] = t.surface_rule;
    j["class"] = t.semantic_class;
    out << j.dump() << '\n';
  }
}

std::vector<ToyTask> load_tasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open task file: " + path);
  std::vector<ToyTask> tasks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    ToyTask t;
    t.id = j.at("id").get<std::string>();
    t.initial = sequence_from_string(j.at("initial").get<std::string>());
    t.gt = sequence_from_string(j.at("gt").get<std::string>());
    t.surface_rule = j.at("surface_rule").get<std::string>();
    t.semantic_class = j.at("class").get<std::string>();
    tasks.push_back(std::move(t));
  }
  return tasks;
}

int action_vocab(int len) { return 7 * len + 2; }

Action decode_action(int action_id, int len) {
  if (action_id < 0 || action_id >= action_vocab(len)) {
    throw std::invalid_argument("action id out of range");
  }
  if (action_id < len) return {ActionKind::view, action_id, -1};
  if (action_id < 7 * len) {
    const int e = action_id - len;
    return {ActionKind::edit, e / kAlphabet, e % kAlphabet};
  }
  return action_id == 7 * len ? Action{ActionKind::compile, -1, -1}
                              : Action{ActionKind::finish, -1, -1};
}

int encode_action(const Action& a, int len) {
  switch (a.kind) {
    case ActionKind::view: return a.loc;
    case ActionKind::edit: return len + a.loc * kAlphabet + a.symbol;
    case ActionKind::compile: return 7 * len;
    case ActionKind::finish: return 7 * len + 1;
    case ActionKind::other: break;
  }
  throw std::invalid_argument("unencodable action");
}

ToyEnv::ToyEnv(const ToyTask& task)
    : class_members_(semantic_class_members(task)),
      working_(task.initial),
      viewed_(task.initial.size(), false) {}

int ToyEnv::current_class_distance() const {
  int best = std::numeric_limits<int>::max();
  for (const Sequence& member : class_members_) {
    int d = 0;
    for (std::size_t i = 0; i < working_.size(); ++i) d += working_[i] != member[i];
    best = std::min(best, d);
  }
  return best;
}

bool ToyEnv::viewed(int loc) const {
  return loc >= 0 && static_cast<std::size_t>(loc) < viewed_.size() &&
         viewed_[static_cast<std::size_t>(loc)];
}

std::vector<int> ToyEnv::step(const Action& action) {
  if (finished_) throw std::logic_error("no actions accepted after finish");
  const int len = static_cast<int>(working_.size());
  switch (action.kind) {
    case ActionKind::view:
      if (action.loc < 0 || action.loc >= len) return {kEchoError};
      viewed_[static_cast<std::size_t>(action.loc)] = true;
      return {kEchoViewBase + working_[static_cast<std::size_t>(action.loc)]};
    case ActionKind::edit:
      if (action.loc < 0 || action.loc >= len || action.symbol < 0 ||
          action.symbol >= kAlphabet) {
        return {kEchoError};
      }
      working_[static_cast<std::size_t>(action.loc)] = action.symbol;
      return {kEchoEditAck};
    case ActionKind::compile: {
      compile_called_ = true;
      compile_verdict_known_ = true;
      const std::optional<int> violation = first_violation(working_);
      last_compile_ok_ = !violation.has_value();
      if (last_compile_ok_) return {kEchoCompileOk + 1};
      return {kEchoCompileOk, kEchoViolationBase + *violation};
    }
    case ActionKind::finish:
      finished_ = true;
      return {};
    case ActionKind::other:
      return {kEchoError};
  }
  return {kEchoError};
}

std::string context_key(const ToyEnv& env, const ToyTask& task,
                        ActionKind last_kind, bool hint_visible) {
  const char kind_char[] = {'v', 'e', 'c', 'f', '-'};
  std::string key = "k=";
  key.push_back(kind_char[static_cast<int>(last_kind)]);
  key += "|c=";
  key.push_back(!env.compile_verdict_known_ ? 'n'
                                            : (env.last_compile_ok_ ? '1' : '0'));
  key += "|d=";
  key.push_back(
      static_cast<char>('0' + std::min(env.current_class_distance(), 3)));
  if (hint_visible) {
    key += "|h=" + sequence_to_string(task.gt);
    key += "|w=" + sequence_to_string(env.working());
  }
  return key;
}

Trajectory sample_trajectory(const TabularPolicy& policy, const ToyTask& task,
                             const SampleOptions& opts, std::mt19937_64& rng,
                             const TabularPolicy* reference) {
  const int len = static_cast<int>(task.initial.size());
  ToyEnv env(task);
  Trajectory traj;
  traj.prompt_id = task.id;
  std::vector<TurnEvent> events;
  ActionKind last = ActionKind::other;
  for (int i = 0; i < opts.max_steps; ++i) {
    const std::string base = context_key(env, task, last, false);
    const bool need_hinted = opts.hint_visible || opts.record_teacher_context;
    const std::string hinted =
        need_hinted ? context_key(env, task, last, true) : std::string{};
    const std::string& ctx = opts.hint_visible ? hinted : base;
    const int a = opts.greedy ? policy.argmax(ctx) : policy.sample(ctx, rng);
    const double lp = policy.log_prob(ctx, a);

    StepRecord step;
    step.kind = decode_action(a, len).kind;
    step.assistant_begin = traj.token_count();
    TokenRecord tok;
    tok.token_id = a;
    tok.role_flag = 1;
    tok.step_index = i;
    tok.context = ctx;
    if (need_hinted) {
      tok.hint_free_context = base;
      tok.teacher_context = hinted;
      tok.logp_teacher = policy.log_prob(hinted, a);
    }
    tok.logp_current = lp;
    tok.logp_old = lp;
    tok.logp_ref = reference ? reference->log_prob(ctx, a) : lp;
    traj.tokens.push_back(std::move(tok));
    step.assistant_end = traj.token_count();
    step.assistant_tokens = 1;

    const std::vector<int> echo = env.step(decode_action(a, len));
    step.echo_begin = traj.token_count();
    for (int obs : echo) {
      TokenRecord e;
      e.token_id = obs;
      e.role_flag = 0;
      e.step_index = i;
      traj.tokens.push_back(std::move(e));
    }
    step.echo_end = traj.token_count();
    traj.steps.push_back(step);

    TurnEvent ev;
    ev.kind = step.kind;
    ev.output_tokens = 1;
    ev.echo_tokens = static_cast<int>(echo.size());
    events.push_back(ev);
    last = step.kind;
    if (env.finished()) break;
  }
  Limits limits;
  limits.max_steps = opts.max_steps;
  limits.max_context_tokens = std::numeric_limits<long>::max();
  limits.max_step_tokens = std::numeric_limits<int>::max();
  traj.exit_reason = classify_exit(events, limits);
  return traj;
}

void synthetic_step_scorer(Trajectory& traj, const ToyTask& task,
                           const ScorerRubric& rubric) {
  const int len = static_cast<int>(task.initial.size());
  ToyEnv env(task);
  for (StepRecord& step : traj.steps) {
    const Action action = decode_action(
        traj.tokens[static_cast<std::size_t>(step.assistant_begin)].token_id, len);
    const int pre_dist = env.current_class_distance();
    const bool was_viewed = action.kind == ActionKind::view && env.viewed(action.loc);
    env.step(action);
    const int post_dist = env.current_class_distance();
    double score = 0.0;
    switch (action.kind) {
      case ActionKind::view:
        score = was_viewed ? rubric.redundant_view : rubric.fresh_view;
        break;
      case ActionKind::edit:
        if (post_dist == 0) score = rubric.edit_reach_class;
        else if (post_dist < pre_dist) score = rubric.edit_closer;
        else if (post_dist == pre_dist) score = rubric.edit_neutral;
        else score = rubric.edit_farther;
        break;
      case ActionKind::compile:
        score = rubric.compile_base +
                (surface_check(env.working()) ? rubric.compile_ok_bonus : 0.0);
        break;
      case ActionKind::finish:
        score = surface_check(env.working()) ? rubric.finish_ok
                                             : rubric.finish_broken;
        break;
      case ActionKind::other:
        score = 0.0;
        break;
    }
    step.process_score = std::clamp(score, 0.0, 1.0);
  }
}

bool finished_without_compile(const Trajectory& traj) {
  bool compiled = false;
  for (const StepRecord& step : traj.steps) {
    if (step.kind == ActionKind::compile) compiled = true;
    if (step.kind == ActionKind::finish) return !compiled;
  }
  return false;
}

Sequence replay_final_sequence(const Trajectory& traj, const ToyTask& task) {
  const int len = static_cast<int>(task.initial.size());
  ToyEnv env(task);
  for (const StepRecord& step : traj.steps) {
    env.step(decode_action(
        traj.tokens[static_cast<std::size_t>(step.assistant_begin)].token_id, len));
  }
  return env.working();
}

}  // namespace grpolab
