#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "grpolab/policy.hpp"
#include "grpolab/trajectory.hpp"

namespace grpolab {

// Alphabet: 0 = '(', 1 = ')', 2..5 = letters a..d.
inline constexpr int kAlphabet = 6;
inline constexpr int kOpen = 0;
inline constexpr int kClose = 1;

using Sequence = std::vector<int>;

std::string sequence_to_string(const Sequence& seq);
Sequence sequence_from_string(const std::string& s);

// Surface rule C: balanced, properly nested delimiters.
bool surface_check(const Sequence& seq);

// First delimiter position that breaks well-formedness, if any.
std::optional<int> first_violation(const Sequence& seq);

// A weak-feedback repair task: the surface rule is necessary but not
// sufficient for membership in the semantic class of gt_repair.
struct ToyTask {
  std::string id;
  Sequence initial;
  Sequence gt;
  std::string surface_rule = "balanced";
  std::string semantic_class;  // class id, derived from gt
};

// Semantic predicate S: identical delimiter skeleton to gt and, within
// each delimiter-bounded letter segment, the same letter multiset
// (independent letter placements commute).
bool semantic_check(const Sequence& seq, const ToyTask& task);

std::vector<Sequence> semantic_class_members(const ToyTask& task);

// Min Hamming distance from seq to any class member; large for sequences
// of the wrong shape.
int class_distance(const Sequence& seq, const ToyTask& task);

// Generates a task with a broken initial sequence 1-2 edits from gt,
// verifying exhaustively over the 6^len space that S implies C and that a
// C-satisfying shortcut outside the class exists. Throws if len makes the
// space exceed 1e4 sequences.
ToyTask generate_task(int len, std::mt19937_64& rng);
std::vector<ToyTask> generate_tasks(int count, int len, std::uint64_t seed);

void save_tasks(const std::vector<ToyTask>& tasks, const std::string& path);
std::vector<ToyTask> load_tasks(const std::string& path);

// Action vocabulary for length-L tasks: [0,L) view, [L,7L) edit(loc,sym),
// 7L compile, 7L+1 finish.
int action_vocab(int len);

struct Action {
  ActionKind kind = ActionKind::other;
  int loc = -1;
  int symbol = -1;
};

Action decode_action(int action_id, int len);
int encode_action(const Action& a, int len);

class ToyEnv {
 public:
  explicit ToyEnv(const ToyTask& task);

  // Applies one action and returns the environment echo tokens. Actions
  // after finish are rejected. Out-of-range locations echo an error
  // observation instead of throwing.
  std::vector<int> step(const Action& action);

  const Sequence& working() const { return working_; }
  bool finished() const { return finished_; }
  bool last_compile_ok() const { return last_compile_ok_; }
  bool compile_called() const { return compile_called_; }
  bool viewed(int loc) const;

  // class_distance over the cached member list
  int current_class_distance() const;

 private:
  std::vector<Sequence> class_members_;
  Sequence working_;
  std::vector<bool> viewed_;
  bool finished_ = false;
  bool compile_called_ = false;
  bool last_compile_ok_ = false;
  bool compile_verdict_known_ = false;

  friend std::string context_key(const ToyEnv& env, const ToyTask& task,
                                 ActionKind last_kind, bool hint_visible);
};

// Tabular-policy context key: (last action kind, last compile verdict,
// coarse class-distance bucket). The hinted (teacher) key additionally
// reveals the ground-truth repair and the working sequence.
std::string context_key(const ToyEnv& env, const ToyTask& task,
                        ActionKind last_kind, bool hint_visible);

struct SampleOptions {
  int max_steps = 12;
  bool hint_visible = false;
  bool greedy = false;
  // record the hint-conditioned context key on every assistant token even
  // when sampling hint-free (teacher scoring of student rollouts)
  bool record_teacher_context = false;
};

// Samples one trajectory at temperature 1 (or greedily); logp_current is
// recorded at sampling time and equals logp_old. logp_ref is filled from
// `reference` (the sampling policy when null).
Trajectory sample_trajectory(const TabularPolicy& policy, const ToyTask& task,
                             const SampleOptions& opts, std::mt19937_64& rng,
                             const TabularPolicy* reference = nullptr);

struct ScorerRubric {
  double compile_base = 0.7;
  double compile_ok_bonus = 0.2;
  double redundant_view = 0.1;
  double fresh_view = 0.5;
  double edit_reach_class = 1.0;
  double edit_closer = 0.8;
  double edit_neutral = 0.4;
  double edit_farther = 0.2;
  double finish_ok = 0.8;
  double finish_broken = 0.3;
};

// Deterministic information-gain rubric; writes s_i into each step.
void synthetic_step_scorer(Trajectory& traj, const ToyTask& task,
                           const ScorerRubric& rubric = {});

// Violation of the compile-before-finish convention (logged, never
// reward-zeroing).
bool finished_without_compile(const Trajectory& traj);

// Final working sequence after replaying the trajectory's actions.
Sequence replay_final_sequence(const Trajectory& traj, const ToyTask& task);

}  // namespace grpolab
