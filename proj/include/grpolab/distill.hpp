#pragma once

#include <optional>
#include <string>
#include <variant>

#include "grpolab/policy.hpp"
#include "grpolab/trajectory.hpp"

namespace grpolab {

enum class KlDirection { teacher_to_student, student_to_teacher };
enum class KlAggregation { masked_sum, masked_mean, per_token_in_advantage };

KlAggregation kl_aggregation_from_string(const std::string& s);
const char* to_string(KlAggregation a);

struct KlConfig {
  KlDirection direction = KlDirection::student_to_teacher;
  KlAggregation aggregation = KlAggregation::masked_sum;
  double beta = 0.02;
  std::optional<int> topk;  // top-k of the first argument, tail lumped
};

enum class DistillModeKind { off, pi_distill, opsd };

struct DistillMode {
  DistillModeKind mode = DistillModeKind::off;
  double alpha = 0.5;  // pi_distill teacher/student mixing weight
};

// Exact categorical KL in the stated direction. teacher_to_student is
// KL(teacher || student); student_to_teacher is KL(student || teacher).
// With topk set, the sum runs over the top-k tokens of the distribution on
// the left of the divergence, with the remaining mass lumped into one tail
// bucket. Throws when either input is not normalized to 1e-6.
double token_kl(const Vec& p_teacher, const Vec& p_student,
                KlDirection direction, std::optional<int> topk = std::nullopt);

// Per-token KLs over the trajectory, zero on echo tokens. Teacher
// distributions come from the sampling-time (hinted) context, student
// distributions from the hint-free context.
Vec per_token_kl(const Trajectory& traj, const TabularPolicy& policy,
                 const KlConfig& cfg);

// masked_sum / masked_mean collapse to a scalar; per_token_in_advantage
// returns the vector for injection into advantages instead of reward.
std::variant<double, Vec> masked_kl(const Trajectory& traj,
                                    const TabularPolicy& policy,
                                    const KlConfig& cfg);

// R~ = R_env - beta * kl; shaped rewards feed group advantages unchanged.
double shape_reward_opsd(double r_env, double kl, double beta);
double shape_reward_pidistill(double r_env, double kl_teacher_to_student,
                              double beta);

// Batch expansion for pi-Distill: the teacher-sampled trajectory is
// duplicated into a student copy (hint-free current over hinted old) and a
// teacher copy (hinted current over hinted old). Both share the shaped
// reward and group advantage; loss weights are 2(1-alpha) and 2*alpha.
struct ExpandedPair {
  Trajectory student;
  Trajectory teacher;
};
ExpandedPair expand_batch(const Trajectory& teacher_traj, const DistillMode& mode);

}  // namespace grpolab
