#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace grpolab {

// 2x2 judge-vs-human confusion counts on the "consistent" class:
// tp = judge consistent & human consistent, fp = judge consistent & human
// inconsistent, fn = judge inconsistent & human consistent, tn = both
// inconsistent.
struct AuditTable {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;

  long total() const { return tp + fp + fn + tn; }
};

struct ConfusionMetrics {
  double agreement = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

ConfusionMetrics confusion_metrics(const AuditTable& t);

// kappa = (p_o - p_e) / (1 - p_e) with marginal-product chance agreement.
double cohen_kappa(const AuditTable& t);

// Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_ci(long successes, long n, double z);

// McNemar without continuity correction: chi2 = (b-c)^2/(b+c), p from the
// chi-square distribution with one degree of freedom. Throws when b+c = 0.
std::pair<double, double> mcnemar(long b, long c);

double chi2_sf_1df(double chi2);

// p_true = (p_obs - (1 - spec)) / (sens + spec - 1), clamped to [0,1].
// Requires sens + spec > 1.
double rogan_gladen(double p_obs, double sensitivity, double specificity);

// Percentile bootstrap interval for kappa over (judge, human) label pairs.
std::pair<double, double> bootstrap_kappa_ci(
    const std::vector<std::pair<bool, bool>>& labels, int resamples,
    std::uint64_t seed);

AuditTable table_from_labels(const std::vector<std::pair<bool, bool>>& labels);

}  // namespace grpolab
