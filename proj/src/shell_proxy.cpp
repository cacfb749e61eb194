#include "scorelab/shell_proxy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "scorelab/error.hpp"
#include "scorelab/parallel.hpp"
#include "scorelab/random.hpp"

namespace scorelab {

std::string to_string(ShellRegime regime) {
  switch (regime) {
    case ShellRegime::exact_poisson: return "exact-poisson";
    case ShellRegime::gaussian: return "gaussian";
    case ShellRegime::deterministic: return "deterministic";
  }
  return "?";
}

ShellRegime shell_regime(double mu) {
  if (mu < 50.0) return ShellRegime::exact_poisson;
  if (mu < 1e8) return ShellRegime::gaussian;
  return ShellRegime::deterministic;
}

double ShellOccupancy::log_size() const {
  LogSumExp acc;
  for (double v : log_N) acc.add(v);
  return acc.value();
}

std::vector<double> shell_log_means(int d, double rho) {
  std::vector<double> out(static_cast<std::size_t>(d) + 1);
  const double shift = rho * d - d * kLn2;
  for (int k = 0; k <= d; ++k) out[static_cast<std::size_t>(k)] = log_binomial(d, k) + shift;
  return out;
}

namespace {

void check_shell_args(int d, double rho) {
  require(d >= 2 && d % 2 == 0, "even dimension required (got d=" + std::to_string(d) + ")");
  require(rho > 0.0 && rho < kLn2, "rho must lie in (0, ln 2)");
}

}  // namespace

ShellOccupancy sample_occupancies(int d, double rho, std::uint64_t seed) {
  check_shell_args(d, rho);
  ShellOccupancy occ;
  occ.d = d;
  occ.rho = rho;
  occ.log_mu = shell_log_means(d, rho);
  occ.regime.resize(occ.log_mu.size());
  occ.log_N.assign(occ.log_mu.size(), kNegInf);
  for (std::size_t k = 0; k < occ.log_mu.size(); ++k) occ.regime[k] = shell_regime(std::exp(occ.log_mu[k]));

  Rng rng(seed);
  for (;;) {
    bool any = false;
    for (std::size_t k = 0; k < occ.log_mu.size(); ++k) {
      const double mu = std::exp(occ.log_mu[k]);
      double count = 0.0;
      switch (occ.regime[k]) {
        case ShellRegime::exact_poisson:
          count = static_cast<double>(std::poisson_distribution<long long>(mu)(rng));
          break;
        case ShellRegime::gaussian:
          count = std::max(0.0, std::round(mu + std::sqrt(mu) * std::normal_distribution<double>()(rng)));
          break;
        case ShellRegime::deterministic:
          occ.log_N[k] = occ.log_mu[k];
          any = true;
          continue;
      }
      occ.log_N[k] = count > 0.0 ? std::log(count) : kNegInf;
      any = any || count > 0.0;
    }
    if (any) break;
    ++occ.resample_events;
  }
  return occ;
}

ShellOccupancy occupancy_from_log_counts(int d, std::vector<double> log_counts) {
  require(static_cast<int>(log_counts.size()) == d + 1, "need d + 1 shell counts");
  ShellOccupancy occ;
  occ.d = d;
  occ.log_N = std::move(log_counts);
  occ.log_mu.assign(occ.log_N.size(), kNegInf);
  occ.regime.assign(occ.log_N.size(), ShellRegime::deterministic);
  return occ;
}

ProxyTerms proxy_terms(const ShellOccupancy& occ, double tau) {
  require(tau > 0.0, "tau must be positive");
  const int d = occ.d;
  const double log_size = occ.log_size();
  if (log_size == kNegInf) throw DomainError("all shells are empty");

  const double log_u = -2.0 / (tau * tau);
  const double u = std::exp(log_u);
  ProxyTerms t;
  LogSumExp Z;
  for (int k = 0; k <= d; ++k) Z.add(occ.log_N[static_cast<std::size_t>(k)] + k * log_u);
  t.log_Z = Z.value();
  t.density_ratio = std::exp(d * kLn2 - log_size + t.log_Z - d * std::log1p(u));

  double alpha = 0.0;
  double variance = 0.0;
  for (int k = 0; k <= d; ++k) {
    const double log_n = occ.log_N[static_cast<std::size_t>(k)];
    if (log_n == kNegInf) continue;
    alpha += std::exp(log_n + k * log_u - t.log_Z) * (1.0 - 2.0 * k / d);
    if (k == 0 || k == d) continue;
    // f_k = (C - N) / (C - 1) = (1 - N/C) / (1 - 1/C), formed from logs.
    const double log_c = log_binomial(d, k);
    double f = -std::expm1(log_n - log_c) / -std::expm1(-log_c);
    if (f < 0.0 || f > 1.0) {
      ++t.clamp_events;
      f = std::clamp(f, 0.0, 1.0);
    }
    const double v = 4.0 * k * (d - k) / (static_cast<double>(d) * d);
    variance += std::exp(log_n + 2.0 * k * log_u - 2.0 * t.log_Z) * v * f;
  }
  t.alpha_bar = alpha;
  t.m0 = -std::expm1(log_u) / (1.0 + u);
  t.bias = (t.alpha_bar - t.m0) * (t.alpha_bar - t.m0);
  t.variance = variance;
  t.signal = std::pow(tau, -4.0) * t.density_ratio * (t.bias + t.variance);
  return t;
}

double solve_q_rho(double rho) {
  require(rho > 0.0 && rho < kLn2, "rho must lie in (0, ln 2)");
  const double target = kLn2 - rho;
  auto h = [](double q) { return -q * std::log(q) - (1.0 - q) * std::log1p(-q); };
  double lo = 1e-12;
  double hi = 0.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double value = h(mid);
    if (value < target) lo = mid; else hi = mid;
    if (std::abs(value - target) <= 1e-14 || hi - lo <= 1e-17) break;
  }
  return 0.5 * (lo + hi);
}

double matching_scale(double rho) {
  const double q = solve_q_rho(rho);
  const double u = q / (1.0 - q);
  return std::sqrt(2.0 / -std::log(u));
}

double q_of_tau(double tau) { return 1.0 / (1.0 + std::exp(2.0 / (tau * tau))); }

std::vector<double> log_tau_grid(double tau_star, int points) {
  require(points >= 2, "grid needs at least 2 points");
  const double lo = std::log(tau_star) - 0.5;
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = lo + static_cast<double>(i) / (points - 1);
  return grid;
}

std::vector<double> median_curve(const std::vector<std::vector<double>>& curves) {
  require(!curves.empty(), "median of no curves");
  const std::size_t length = curves.front().size();
  std::vector<double> out(length);
  std::vector<double> column(curves.size());
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t t = 0; t < curves.size(); ++t) column[t] = curves[t][i];
    const std::size_t mid = column.size() / 2;
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid), column.end());
    double value = column[mid];
    if (column.size() % 2 == 0) {
      const double below = *std::max_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(mid));
      value = 0.5 * (value + below);
    }
    out[i] = value;
  }
  return out;
}

ProxyCurve run_sweep(int d, double rho, int trials, std::uint64_t seed, int grid_points) {
  check_shell_args(d, rho);
  require(trials >= 1 && trials % 2 == 1, "trials must be a positive odd number");
  ProxyCurve curve;
  curve.d = d;
  curve.rho = rho;
  curve.trials = trials;
  curve.seed = seed;
  curve.q_rho = solve_q_rho(rho);
  curve.tau_star = matching_scale(rho);
  curve.log_tau_grid = log_tau_grid(curve.tau_star, grid_points);

  std::vector<std::vector<double>> per_trial(static_cast<std::size_t>(trials));
  std::vector<int> clamps(static_cast<std::size_t>(trials), 0);
  std::vector<int> resamples(static_cast<std::size_t>(trials), 0);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    const auto occ = sample_occupancies(d, rho, derive_seed(seed, static_cast<std::uint64_t>(t)));
    resamples[t] = occ.resample_events;
    auto& values = per_trial[t];
    values.resize(curve.log_tau_grid.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto terms = proxy_terms(occ, std::exp(curve.log_tau_grid[i]));
      values[i] = terms.signal;
      clamps[t] += terms.clamp_events;
    }
  });
  curve.median_signal = median_curve(per_trial);
  for (int t = 0; t < trials; ++t) {
    curve.clamp_events += clamps[static_cast<std::size_t>(t)];
    curve.resample_events += resamples[static_cast<std::size_t>(t)];
  }
  return curve;
}

double fwhm(std::span<const double> grid, std::span<const double> values) {
  require(grid.size() == values.size() && grid.size() >= 2, "fwhm needs matching grid and values");
  const auto peak = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
  const double top = values[peak];
  require(top > 0.0, "fwhm needs a strictly positive maximum");
  const double half = 0.5 * top;

  auto crossing = [&](std::size_t below, std::size_t above) {
    const double t = (half - values[below]) / (values[above] - values[below]);
    return grid[below] + t * (grid[above] - grid[below]);
  };
  double left = 0.0;
  bool found_left = false;
  for (std::size_t i = peak; i-- > 0;) {
    if (values[i] < half) {
      left = crossing(i, i + 1);
      found_left = true;
      break;
    }
  }
  double right = 0.0;
  bool found_right = false;
  for (std::size_t i = peak + 1; i < values.size(); ++i) {
    if (values[i] < half) {
      right = crossing(i, i - 1);
      found_right = true;
      break;
    }
  }
  if (!found_left || !found_right) throw DomainError("window exceeds grid");
  return right - left;
}

ScalingFit fit_scaling(std::span<const int> dims, std::span<const double> widths) {
  require(dims.size() == widths.size() && dims.size() >= 3, "fit_scaling needs at least 3 (d, fwhm) pairs");
  std::vector<double> x(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) x[i] = 1.0 / std::sqrt(static_cast<double>(dims[i]));
  const auto fit = ordinary_least_squares(x, widths);
  return {fit.slope, fit.intercept, fit.r_squared};
}

}  // namespace scorelab
