#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "grpolab/stats.hpp"

using namespace grpolab;

namespace {
const AuditTable kPooledAudit{176, 24, 16, 184};
}

TEST_CASE("pooled audit confusion metrics") {
  const ConfusionMetrics m = confusion_metrics(kPooledAudit);
  CHECK(m.agreement == doctest::Approx(0.900).epsilon(1e-9));
  CHECK(m.precision == doctest::Approx(0.880).epsilon(1e-9));
  CHECK(m.recall == doctest::Approx(0.9167).epsilon(1e-4));
  CHECK(m.f1 == doctest::Approx(0.898).epsilon(1e-3));
}

TEST_CASE("perfect judge metrics are all one") {
  const ConfusionMetrics m = confusion_metrics({40, 0, 0, 60});
  CHECK(m.agreement == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
}

TEST_CASE("random tables match definitional recomputation") {
  std::mt19937_64 rng(59);
  std::uniform_int_distribution<long> count(0, 200);
  for (int rep = 0; rep < 2000; ++rep) {
    const AuditTable t{count(rng), count(rng), count(rng), count(rng)};
    if (t.total() == 0) continue;
    const ConfusionMetrics m = confusion_metrics(t);
    CHECK(m.agreement ==
          doctest::Approx(static_cast<double>(t.tp + t.tn) / t.total()).epsilon(1e-12));
    if (t.tp + t.fp > 0) {
      CHECK(m.precision ==
            doctest::Approx(static_cast<double>(t.tp) / (t.tp + t.fp)).epsilon(1e-12));
    }
    if (t.tp + t.fn > 0) {
      CHECK(m.recall ==
            doctest::Approx(static_cast<double>(t.tp) / (t.tp + t.fn)).epsilon(1e-12));
    }
    CHECK(m.agreement >= 0.0);
    CHECK(m.agreement <= 1.0);
  }
}

TEST_CASE("kappa on the pooled audit table") {
  // observed agreement 0.9, chance agreement 0.5
  CHECK(cohen_kappa(kPooledAudit) == doctest::Approx(0.80).epsilon(1e-9));
  CHECK(cohen_kappa({50, 0, 0, 50}) == 1.0);
}

TEST_CASE("independent marginals give near-zero kappa") {
  std::mt19937_64 rng(61);
  std::bernoulli_distribution judge(0.6), human(0.3);
  AuditTable t;
  for (int i = 0; i < 200000; ++i) {
    const bool j = judge(rng), h = human(rng);
    if (j && h) ++t.tp;
    else if (j && !h) ++t.fp;
    else if (!j && h) ++t.fn;
    else ++t.tn;
  }
  CHECK(std::abs(cohen_kappa(t)) < 0.01);
}

TEST_CASE("wilson interval values and containment") {
  const auto [lo, hi] = wilson_ci(360, 400, 1.96);
  CHECK(lo == doctest::Approx(0.866689).epsilon(1e-5));
  CHECK(hi == doctest::Approx(0.925701).epsilon(1e-5));

  const auto [zlo, zhi] = wilson_ci(0, 1, 1.96);
  CHECK(zlo == 0.0);
  CHECK(zhi == doctest::Approx(0.7935).epsilon(1e-3));

  std::mt19937_64 rng(67);
  for (int rep = 0; rep < 2000; ++rep) {
    const long n = 1 + static_cast<long>(rng() % 500);
    const long k = static_cast<long>(rng() % (n + 1));
    const auto [a, b] = wilson_ci(k, n, 1.96);
    const double p = static_cast<double>(k) / n;
    CHECK(a <= p + 1e-12);
    CHECK(b >= p - 1e-12);
    CHECK(a >= 0.0);
    CHECK(b <= 1.0);
    // at a sample proportion of exactly 1 the upper endpoint collapses to 1
    if (k == n) CHECK(b == doctest::Approx(1.0).epsilon(1e-12));
    if (k < n) CHECK(b < 1.0);
  }
}

TEST_CASE("mcnemar without continuity correction") {
  const auto [chi2, p] = mcnemar(36, 16);
  CHECK(chi2 == doctest::Approx(7.6923).epsilon(1e-4));
  CHECK(p == doctest::Approx(0.006).epsilon(0.1));
  CHECK(p <= 0.01);

  const auto [zero, one] = mcnemar(9, 9);
  CHECK(zero == 0.0);
  CHECK(one == 1.0);

  CHECK_THROWS_AS(mcnemar(0, 0), std::invalid_argument);
}

TEST_CASE("chi-square survival function at one dof") {
  // reference values from the normal tail: P(chi2 > z^2) = 2*(1-Phi(z))
  CHECK(chi2_sf_1df(3.841458820694124) == doctest::Approx(0.05).epsilon(1e-8));
  CHECK(chi2_sf_1df(6.634896601021213) == doctest::Approx(0.01).epsilon(1e-8));
  CHECK(chi2_sf_1df(0.0) == 1.0);
}

TEST_CASE("prevalence correction and its forward inverse") {
  CHECK(rogan_gladen(0.53, 0.917, 0.885) == doctest::Approx(0.5175).epsilon(1e-3));
  CHECK(rogan_gladen(0.48, 0.917, 0.885) == doctest::Approx(0.4555).epsilon(1e-3));
  CHECK(rogan_gladen(1.0 - 0.885, 0.917, 0.885) == doctest::Approx(0.0));
  CHECK_THROWS_AS(rogan_gladen(0.5, 0.5, 0.5), std::invalid_argument);

  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 10000; ++rep) {
    const double sens = 0.55 + 0.45 * u(rng);
    const double spec = 0.55 + 0.45 * u(rng);
    const double p_true = u(rng);
    const double p_obs = sens * p_true + (1.0 - spec) * (1.0 - p_true);
    CHECK(std::abs(rogan_gladen(p_obs, sens, spec) - p_true) <= 1e-12);
  }
  // out-of-range observations clamp
  CHECK(rogan_gladen(0.0, 0.9, 0.9) == 0.0);
  CHECK(rogan_gladen(1.0, 0.9, 0.9) == 1.0);
}

TEST_CASE("bootstrap kappa interval") {
  std::vector<std::pair<bool, bool>> labels;
  for (long i = 0; i < kPooledAudit.tp; ++i) labels.emplace_back(true, true);
  for (long i = 0; i < kPooledAudit.fp; ++i) labels.emplace_back(true, false);
  for (long i = 0; i < kPooledAudit.fn; ++i) labels.emplace_back(false, true);
  for (long i = 0; i < kPooledAudit.tn; ++i) labels.emplace_back(false, false);
  CHECK(table_from_labels(labels).tp == kPooledAudit.tp);
  CHECK(table_from_labels(labels).tn == kPooledAudit.tn);

  const auto [lo, hi] = bootstrap_kappa_ci(labels, 10000, 2024);
  CHECK(lo <= 0.80);
  CHECK(hi >= 0.80);
  CHECK(lo > 0.5);
  CHECK(hi < 1.0);
  // deterministic under a fixed seed
  const auto again = bootstrap_kappa_ci(labels, 10000, 2024);
  CHECK(again.first == lo);
  CHECK(again.second == hi);

  std::vector<std::pair<bool, bool>> perfect(50, {true, true});
  for (int i = 0; i < 50; ++i) perfect.emplace_back(false, false);
  const auto degenerate = bootstrap_kappa_ci(perfect, 2000, 1);
  CHECK(degenerate.first == 1.0);
  CHECK(degenerate.second == 1.0);
}
