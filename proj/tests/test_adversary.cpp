#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "scorelab/adversary.hpp"
#include "scorelab/codebook.hpp"
#include "scorelab/error.hpp"
#include "scorelab/mixture_score.hpp"
#include "scorelab/numeric.hpp"
#include "scorelab/random.hpp"

using namespace scorelab;

namespace {

// Median of b(z1) + b(z2) for the hypercube coordinate term
// b(z) = ln 2 - ln(1 + exp(2z/tau - 2/tau^2)), z ~ N(0,1), by a weighted grid.
double hypercube_pair_median(double tau) {
  const int points = 1500;
  const double lo = -8.0;
  const double h = 16.0 / points;
  std::vector<double> b(points), w(points);
  for (int i = 0; i < points; ++i) {
    const double z = lo + (i + 0.5) * h;
    b[static_cast<std::size_t>(i)] = kLn2 - log1p_exp(2.0 * z / tau - 2.0 / (tau * tau));
    w[static_cast<std::size_t>(i)] = normal_pdf(z) * h;
  }
  std::vector<std::pair<double, double>> cells;
  cells.reserve(static_cast<std::size_t>(points) * points);
  double total = 0.0;
  for (int i = 0; i < points; ++i) {
    for (int j = 0; j < points; ++j) {
      const double weight = w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(j)];
      cells.emplace_back(b[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(j)], weight);
      total += weight;
    }
  }
  std::sort(cells.begin(), cells.end());
  double acc = 0.0;
  for (const auto& [value, weight] : cells) {
    acc += weight;
    if (acc >= 0.5 * total) return value;
  }
  return cells.back().first;
}

std::vector<double> random_point(int d, double scale, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> x(static_cast<std::size_t>(d));
  for (auto& v : x) v = scale * normal(rng);
  return x;
}

TauState forced_state(double log_lambda, GateDecision decision) {
  TauState state;
  state.threshold.log_lambda = log_lambda;
  state.gate.decision = decision;
  return state;
}

}  // namespace

TEST_CASE("profile formulas") {
  const auto spec = build_support(SupportKind::hypercube, 16, 1.0, 0.1);
  const auto lp = lp_profile(spec, 2.0, 0.5, 0.2, 8);
  CHECK(lp.zeta(1.0) == doctest::Approx(std::pow(0.5 / 16.0, 2)));
  CHECK(lp.zeta(1e3) == 0.5);
  CHECK(lp.theta(2.0) == doctest::Approx(0.0625));
  CHECK(lp.delta() == 0.2 * 0.2 / (80.0 * 8));

  const auto lp3 = lp_profile(spec, 3.0, 0.5, 0.2, 8);
  CHECK(lp3.theta(2.0) == doctest::Approx(std::pow(0.25, 3) * (4.0 / 16.0)));

  const auto psi = psi1_profile(spec, 2.0, 0.1, 4);
  CHECK(psi.tau_star() == doctest::Approx(8.0));
  CHECK(psi.zeta(1.0) == doctest::Approx(2.0 * std::exp(-4.0)));
  CHECK(psi.zeta(1e6) == 0.25);
  CHECK(psi.theta(1.0) == doctest::Approx(16.0 / 4.0 * std::exp(-4.0)));

  CHECK_THROWS_AS(lp_profile(spec, 2.0, 1.0, 0.25, 8), DomainError);
  CHECK_THROWS_AS(lp_profile(spec, 1.5, 1.0, 0.2, 8), DomainError);
  CHECK_THROWS_AS(psi1_profile(spec, 0.0, 0.2, 8), DomainError);
  CHECK(parse_regime("Psi1") == Regime::psi1);
  CHECK_THROWS_AS(parse_regime("L2"), ConfigError);
}

TEST_CASE("threshold estimation") {
  SUBCASE("one-point support gives log lambda 0") {
    const auto spec = build_circle_support_with_points(4, 1.0, 0.1, 1);
    for (double zeta : {0.01, 0.2, 0.5}) CHECK(estimate_threshold(spec, 0.8, zeta, 20000, 1).log_lambda == 0.0);
  }
  SUBCASE("hypercube median matches the convolved block distribution") {
    const auto spec = build_support(SupportKind::hypercube, 2, 1.0, 0.1);
    const auto est = estimate_threshold(spec, 1.0, 0.5, 100000, 11);
    const double exact = hypercube_pair_median(1.0);
    MESSAGE("estimate " << est.log_lambda << " +- " << est.std_err << " exact " << exact);
    CHECK(std::abs(est.log_lambda - exact) <= 3.0 * est.std_err);
  }
  SUBCASE("quantiles are monotone in zeta on one pool") {
    const auto spec = build_support(SupportKind::product_circle, 8, 1.0, 0.2);
    CHECK(estimate_threshold(spec, 0.7, 0.1, 20000, 4).log_lambda <=
          estimate_threshold(spec, 0.7, 0.5, 20000, 4).log_lambda);
  }
  SUBCASE("sample floor") {
    const auto spec = build_support(SupportKind::hypercube, 4, 1.0, 0.1);
    CHECK(min_threshold_samples(0.01) == 10000);
    CHECK_THROWS_AS(estimate_threshold(spec, 1.0, 0.01, 9999, 1), DomainError);
    CHECK_THROWS_AS(estimate_threshold(spec, 1.0, 0.6, 100000, 1), DomainError);
  }
  SUBCASE("lower order statistic and tie convention") {
    const std::vector<double> pool{1.0, 2.0, 2.0, 2.0, 5.0};
    CHECK(threshold_from_sorted_pool(pool, 0.2).log_lambda == 1.0);
    CHECK(threshold_from_sorted_pool(pool, 0.21).log_lambda == 2.0);
  }
  SUBCASE("saddlepoint agrees with Monte Carlo where both apply") {
    const auto spec = build_support(SupportKind::product_circle, 16, 1.0, 0.2);
    for (double zeta : {0.01, 0.05}) {
      const auto mc = estimate_threshold(spec, 0.8, zeta, 200000, 9);
      const auto sp = saddlepoint_threshold(spec, 0.8, zeta);
      MESSAGE("zeta " << zeta << " mc " << mc.log_lambda << " sp " << sp.log_lambda);
      CHECK(sp.method == ThresholdMethod::saddlepoint);
      CHECK(std::abs(sp.log_lambda - mc.log_lambda) <= 0.05 * std::abs(mc.log_lambda) + 4.0 * mc.std_err);
    }
  }
  SUBCASE("auto falls back to saddlepoint below the sample floor") {
    const auto spec = build_support(SupportKind::hypercube, 8, 1.0, 0.1);
    CHECK(estimate_threshold_auto(spec, 1.0, 1e-6, 10000, 1).method == ThresholdMethod::saddlepoint);
    CHECK(estimate_threshold_auto(spec, 1.0, 0.1, 10000, 1).method == ThresholdMethod::monte_carlo);
  }
}

TEST_CASE("mask value") {
  CHECK(mask_value(3.0, 3.0) == 1.0);
  CHECK(mask_value(2.0, 3.0) == 0.0);
  CHECK(mask_value(2.5, 3.0) == 0.5);
  CHECK(mask_value(10.0, 3.0) == 1.0);
  CHECK(mask_value(-10.0, 3.0) == 0.0);
  Rng rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng), lam = u(rng);
    const double ma = mask_value(a, lam), mb = mask_value(b, lam);
    CHECK(ma >= 0.0);
    CHECK(ma <= 1.0);
    CHECK(std::abs(ma - mb) <= std::abs(a - b) + 1e-15);
    CHECK((ma == 1.0) == (a >= lam));
    CHECK((ma == 0.0) == (a <= lam - 1.0));
  }
}

TEST_CASE("Fisher gate") {
  const auto spec = build_circle_support_with_points(4, 1.0, 0.1, 4);
  SUBCASE("enumerated support is null-locked") {
    const auto all = enumerate_support(spec);
    const auto gate = gate_fisher(all, 0.5, lp_profile(spec, 2.0, 1e-3, 0.2, 4), 2000, 1);
    CHECK(gate.decision == GateDecision::null_locked);
    CHECK(gate.J_estimate >= 0.0);
  }
  SUBCASE("single point at base noise with tiny theta is mask-active") {
    const auto natural = build_support(SupportKind::product_circle, 4, 1.0, 0.1);
    const auto cb = sample_codebook(natural, 1, 3);
    const auto gate = gate_fisher(cb, natural.gamma, lp_profile(natural, 2.0, 1e-6, 0.2, 4), 2000, 1);
    CHECK(gate.decision == GateDecision::mask_active);
    CHECK(gate.J_estimate > gate.theta);
  }
  SUBCASE("deterministic and nonnegative") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto cb = sample_codebook(spec, 1 + s, s);
      const auto profile = lp_profile(spec, 2.0, 1.0, 0.2, 4);
      const auto a = gate_fisher(cb, 0.7, profile, 1000, s);
      const auto b = gate_fisher(cb, 0.7, profile, 1000, s);
      CHECK(a.J_estimate >= 0.0);
      CHECK(a.J_estimate == b.J_estimate);
    }
  }
  CHECK_THROWS_AS(gate_fisher(sample_codebook(spec, 2, 1), 1.0, lp_profile(spec, 2.0, 1.0, 0.2, 4), 999, 1),
                  DomainError);
}

TEST_CASE("oracle answer branches") {
  const auto spec = build_support(SupportKind::product_circle, 6, 1.0, 0.2);
  const auto cb = sample_codebook(spec, 3, 17);
  const auto profile = lp_profile(spec, 2.0, 1.0, 0.2, 4);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_point(spec.d, 1.5, rng);
    const auto ones = oracle_answer(cb, 0.6, x, profile, forced_state(-1e9, GateDecision::mask_active));
    CHECK(ones == planted_eval(cb, 0.6, x).score);
    const auto zeros = oracle_answer(cb, 0.6, x, profile, forced_state(1e9, GateDecision::mask_active));
    CHECK(zeros == null_eval(spec, 0.6, x).score);
    const auto locked = oracle_answer(cb, 0.6, x, profile, forced_state(-1e9, GateDecision::null_locked));
    CHECK(locked == null_eval(spec, 0.6, x).score);
  }
  SUBCASE("Psi1 above the cutoff answers the null score") {
    const auto psi = psi1_profile(spec, 1.0, 0.2, 4);
    const double tau = 2.0 * psi.tau_star();
    for (int i = 0; i < 20; ++i) {
      const auto x = random_point(spec.d, tau, rng);
      CHECK(oracle_answer(cb, tau, x, psi, forced_state(-1e9, GateDecision::mask_active)) ==
            null_eval(spec, tau, x).score);
    }
    OracleSession session(std::make_shared<const Codebook>(cb), psi, 3);
    const auto x = random_point(spec.d, tau, rng);
    CHECK(session.answer(tau, x) == null_eval(spec, tau, x).score);
  }
  SUBCASE("exact regime answers the planted score") {
    const auto x = random_point(spec.d, 1.0, rng);
    CHECK(oracle_answer(cb, 0.6, x, exact_profile(spec), forced_state(1e9, GateDecision::null_locked)) ==
          planted_eval(cb, 0.6, x).score);
  }
  SUBCASE("noise below base level is rejected") {
    const auto x = random_point(spec.d, 1.0, rng);
    try {
      oracle_answer(cb, 0.1, x, profile, forced_state(0.0, GateDecision::mask_active));
      FAIL("expected a domain error");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()) == "total noise below base level");
    }
  }
}

TEST_CASE("oracle directional slopes respect the Lipschitz bound") {
  Rng rng(99);
  int probes = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 12; ++inst) {
    const auto kind = inst % 2 ? SupportKind::hypercube : SupportKind::product_circle;
    const auto spec = build_support(kind, 4, 1.0, 0.2);
    const auto cb = std::make_shared<const Codebook>(sample_codebook(spec, 1 + inst % 3, rng()));
    const double tau = 0.25 + 0.1 * inst;
    OracleSession session(cb, lp_profile(spec, 2.0, 1.0, 0.2, 4), rng(), SessionBudget{50000, 2000});
    const double bound = 3.0 / (tau * tau) + 7.0 * spec.R * spec.R * spec.d / std::pow(tau, 4);
    for (int k = 0; k < 100; ++k) {
      auto x = cb->decode(static_cast<std::size_t>(k) % cb->n);
      auto v = random_point(spec.d, 1.0, rng);
      const double vn = euclidean_norm(v);
      for (auto& c : v) c /= vn;
      std::normal_distribution<double> noise(0.0, tau);
      double inf_norm = 0.0;
      for (auto& c : x) {
        c += noise(rng);
        inf_norm = std::max(inf_norm, std::abs(c));
      }
      const double h = 1e-4 * std::max(1.0, inf_norm);
      std::vector<double> y(x);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += h * v[i];
      const double slope = euclidean_distance(session.answer(tau, y), session.answer(tau, x)) / h;
      worst = std::max(worst, slope / bound);
      CHECK(slope <= bound);
      ++probes;
    }
  }
  MESSAGE(probes << " probes, worst slope / bound " << worst);
}

TEST_CASE("sessions are deterministic and share thresholds") {
  const auto spec = build_support(SupportKind::hypercube, 6, 1.0, 0.1);
  const auto cb = std::make_shared<const Codebook>(sample_codebook(spec, 2, 8));
  const auto profile = lp_profile(spec, 2.0, 1.0, 0.2, 4);
  OracleSession a(cb, profile, 42, SessionBudget{20000, 1000});
  OracleSession b(cb, profile, 42, SessionBudget{20000, 1000});
  Rng rng(1);
  for (int i = 0; i < 30; ++i) {
    const double tau = 0.2 + 0.1 * (i % 5);
    const auto x = random_point(spec.d, 1.0, rng);
    CHECK(a.answer(tau, x) == b.answer(tau, x));
    CHECK(a.answer(tau, x) == a.answer(tau, x));
  }
  auto cache = std::make_shared<ThresholdCache>(spec, profile, 20000, 5);
  OracleSession c(cb, profile, 1, SessionBudget{20000, 1000}, cache);
  OracleSession e(std::make_shared<const Codebook>(sample_codebook(spec, 2, 9)), profile, 2, SessionBudget{20000, 1000},
                  cache);
  CHECK(c.state(0.5).threshold.log_lambda == e.state(0.5).threshold.log_lambda);

  OracleSession null(spec, profile, 3);
  CHECK(null.is_null());
  const auto x = random_point(spec.d, 1.0, rng);
  CHECK(null.answer(0.5, x) == null_eval(spec, 0.5, x).score);
  CHECK_THROWS(null.state(0.5));
}

TEST_CASE("accuracy audit") {
  SUBCASE("null-locked instance satisfies the Lp bound") {
    const auto spec = build_support(SupportKind::product_circle, 4, 1.0, 0.3);
    const auto cb = std::make_shared<const Codebook>(sample_codebook(spec, 64, 4));
    OracleSession session(cb, lp_profile(spec, 2.0, 1.0, 0.2, 4), 7, SessionBudget{20000, 4096});
    const auto audit = accuracy_audit(session, 2.0, 20000, 3);
    REQUIRE(audit.gate.decision == GateDecision::null_locked);
    CHECK(audit.gate.J_estimate <= audit.gate.theta);
    CHECK(audit.lp_moment <= audit.lp_bound * (1.0 + 3.0 * audit.lp_std_err / audit.lp_moment));
  }
  SUBCASE("mask-active instance has zero error on the good set") {
    const auto spec = build_support(SupportKind::hypercube, 4, 1.0, 0.1);
    const auto cb = std::make_shared<const Codebook>(sample_codebook(spec, 1, 4));
    OracleSession session(cb, lp_profile(spec, 2.0, 0.2, 0.2, 4), 7, SessionBudget{200000, 4096});
    const auto audit = accuracy_audit(session, 0.3, 20000, 3);
    REQUIRE(audit.gate.decision == GateDecision::mask_active);
    CHECK(audit.good_set_fraction > 0.5);
    CHECK(audit.good_set_max_error == 0.0);
  }
  SUBCASE("Psi1 tails vanish beyond the hard bound and are dominated") {
    const auto spec = build_support(SupportKind::hypercube, 4, 1.0, 0.1);
    const auto cb = std::make_shared<const Codebook>(sample_codebook(spec, 2, 5));
    OracleSession session(cb, psi1_profile(spec, 1.0, 0.2, 4), 7, SessionBudget{200000, 4096});
    const double tau = 0.8;
    const auto audit = accuracy_audit(session, tau, 20000, 3);
    const double hard = 2.0 * spec.R * std::sqrt(static_cast<double>(spec.d)) / (tau * tau);
    for (std::size_t k = 0; k < audit.z.size(); ++k) {
      if (audit.z[k] > hard) CHECK(audit.survival[k] == 0.0);
      CHECK(audit.survival[k] <= audit.survival_bound[k] + 3.0 * audit.survival_std_err[k]);
    }
  }
}

TEST_CASE("rate window") {
  SUBCASE("tau tilde arithmetic") {
    const auto spec = build_support(SupportKind::hypercube, 100, 1.0, 0.1);
    const auto w = compute_window(spec, lp_profile(spec, 2.0, 1.0, 0.2, 4), 1.0, 20000, 1);
    CHECK(w.tau_tilde == doctest::Approx(std::sqrt(1.0 - 0.01 / 10000.0)).epsilon(1e-15));
    CHECK(w.tau_tilde == doctest::Approx(0.9999995).epsilon(1e-9));
    CHECK(w.width >= 0.0);
    CHECK(w.width == doctest::Approx(std::max(w.kappa_plus - w.kappa_minus, 0.0)));
  }
  SUBCASE("smaller delta shifts kappa_minus by the log ratio over d") {
    const auto spec = build_support(SupportKind::hypercube, 64, 1.0, 0.1);
    const auto a = compute_window(spec, lp_profile(spec, 2.0, 1.0, 0.2, 4), 1.0, 20000, 3);
    const auto b = compute_window(spec, lp_profile(spec, 2.0, 1.0, 0.1, 4), 1.0, 20000, 3);
    CHECK(a.log_lambda == b.log_lambda);
    CHECK(a.kappa_minus - b.kappa_minus == doctest::Approx(std::log(a.delta / b.delta) / 64.0).epsilon(1e-12));
  }
  SUBCASE("Psi1 window is empty above the cutoff") {
    const auto spec = build_support(SupportKind::hypercube, 16, 1.0, 0.1);
    const auto psi = psi1_profile(spec, 1.0, 0.2, 4);
    const auto w = compute_window(spec, psi, 1.5 * psi.tau_star(), 20000, 1);
    CHECK(w.empty());
    CHECK(w.width == 0.0);
  }
}

TEST_CASE("window widths against the interval bound (d=256, eps=1e-3)" * doctest::may_fail()) {
  const auto spec = build_support(SupportKind::hypercube, 256, 1.0, 0.1);
  const auto profile = lp_profile(spec, 2.0, 1e-3, 0.2, 8);
  const double d = 256.0;
  const double H = std::log(d / 1e-3) + std::log(spec.R / spec.gamma);
  const double bound = 8.0 * (std::sqrt(H / d) + H / d);
  for (double tau : {0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    const auto w = compute_window(spec, profile, tau, 20000, 1);
    // Window log factor: H_win = max(ln 1/zeta, H(tau), ln 1/delta).
    const double H_win = std::max({std::log(1.0 / w.zeta), w.H, std::log(1.0 / w.delta)});
    CHECK(w.width <= 8.0 * (std::sqrt(H_win / d) + H_win / d));
    CHECK_MESSAGE(w.width <= bound, "tau " << tau << " width " << w.width << " bound " << bound);
  }
}
