#include "grpolab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace grpolab {

ConfusionMetrics confusion_metrics(const AuditTable& t) {
  if (t.tp < 0 || t.fp < 0 || t.fn < 0 || t.tn < 0 || t.total() == 0) {
    throw std::invalid_argument("audit table needs nonnegative counts, total > 0");
  }
  ConfusionMetrics m;
  m.agreement = static_cast<double>(t.tp + t.tn) / static_cast<double>(t.total());
  m.precision = t.tp + t.fp > 0
                    ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp)
                    : 1.0;
  m.recall = t.tp + t.fn > 0
                 ? static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn)
                 : 1.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

double cohen_kappa(const AuditTable& t) {
  const double n = static_cast<double>(t.total());
  if (n <= 0.0) throw std::invalid_argument("empty audit table");
  const double po = static_cast<double>(t.tp + t.tn) / n;
  const double judge_yes = static_cast<double>(t.tp + t.fp) / n;
  const double human_yes = static_cast<double>(t.tp + t.fn) / n;
  const double pe = judge_yes * human_yes + (1.0 - judge_yes) * (1.0 - human_yes);
  if (pe >= 1.0) return 1.0;  // degenerate marginals, all mass on one cell
  return (po - pe) / (1.0 - pe);
}

std::pair<double, double> wilson_ci(long successes, long n, double z) {
  if (n <= 0 || successes < 0 || successes > n) {
    throw std::invalid_argument("invalid proportion counts");
  }
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double chi2_sf_1df(double chi2) {
  if (chi2 < 0.0) throw std::invalid_argument("chi2 must be nonnegative");
  // Survival of chi-square with 1 dof: erfc(sqrt(x/2)).
  return std::erfc(std::sqrt(chi2 / 2.0));
}

std::pair<double, double> mcnemar(long b, long c) {
  if (b < 0 || c < 0) throw std::invalid_argument("negative discordant counts");
  if (b + c == 0) throw std::invalid_argument("no discordant pairs");
  const double diff = static_cast<double>(b - c);
  const double chi2 = diff * diff / static_cast<double>(b + c);
  return {chi2, chi2_sf_1df(chi2)};
}

double rogan_gladen(double p_obs, double sensitivity, double specificity) {
  const double denom = sensitivity + specificity - 1.0;
  if (denom <= 0.0) {
    throw std::invalid_argument("requires sensitivity + specificity > 1");
  }
  const double p_true = (p_obs - (1.0 - specificity)) / denom;
  return std::clamp(p_true, 0.0, 1.0);
}

AuditTable table_from_labels(const std::vector<std::pair<bool, bool>>& labels) {
  AuditTable t;
  for (const auto& [judge, human] : labels) {
    if (judge && human) ++t.tp;
    else if (judge && !human) ++t.fp;
    else if (!judge && human) ++t.fn;
    else ++t.tn;
  }
  return t;
}

std::pair<double, double> bootstrap_kappa_ci(
    const std::vector<std::pair<bool, bool>>& labels, int resamples,
    std::uint64_t seed) {
  if (labels.empty() || resamples < 1) {
    throw std::invalid_argument("need labels and at least one resample");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
  std::vector<double> kappas;
  kappas.reserve(static_cast<std::size_t>(resamples));
  std::vector<std::pair<bool, bool>> sample(labels.size());
  for (int r = 0; r < resamples; ++r) {
    for (auto& s : sample) s = labels[pick(rng)];
    kappas.push_back(cohen_kappa(table_from_labels(sample)));
  }
  std::sort(kappas.begin(), kappas.end());
  const auto pct = [&](double q) {
    const double pos = q * static_cast<double>(kappas.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, kappas.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return kappas[lo] * (1.0 - frac) + kappas[hi] * frac;
  };
  return {pct(0.025), pct(0.975)};
}

}  // namespace grpolab
