#pragma once

// Shell-count model on the hypercube at the query point x = 1: Poissonized
// shell occupancies, the shell-resolved conditional Fisher proxy, median
// curves on a log-tau grid, FWHM extraction, and the width scaling fit.
//
// Occupancies at rate rho reach e^{rho d} points, far beyond double range for
// d in the thousands, so counts are carried as logarithms throughout.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scorelab/numeric.hpp"

namespace scorelab {

enum class ShellRegime { exact_poisson, gaussian, deterministic };
std::string to_string(ShellRegime regime);

/// Regime for a shell with mean mu: Poisson below 50, Gaussian below 1e8.
ShellRegime shell_regime(double mu);

struct ShellOccupancy {
  int d = 0;
  double rho = 0.0;
  std::vector<double> log_mu;  // ln mu_k, k = 0..d
  std::vector<double> log_N;   // ln N_k, -inf for empty shells
  std::vector<ShellRegime> regime;
  int resample_events = 0;  // all-empty draws that were redrawn

  double count(int k) const { return std::exp(log_N[static_cast<std::size_t>(k)]); }
  /// ln |S| = ln sum_k N_k.
  double log_size() const;
};

/// ln mu_k = ln C(d,k) + rho d - d ln 2.
std::vector<double> shell_log_means(int d, double rho);

ShellOccupancy sample_occupancies(int d, double rho, std::uint64_t seed);

/// Occupancy with prescribed (possibly non-integer) counts, given as logs.
ShellOccupancy occupancy_from_log_counts(int d, std::vector<double> log_counts);

struct ProxyTerms {
  double log_Z = 0.0;
  double density_ratio = 0.0;  // R_tau
  double alpha_bar = 0.0;
  double m0 = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double signal = 0.0;  // tau^-4 R_tau (bias + variance)
  int clamp_events = 0;  // shells whose finite-population factor left [0,1]
};

ProxyTerms proxy_terms(const ShellOccupancy& occ, double tau);
inline double proxy_signal(const ShellOccupancy& occ, double tau) { return proxy_terms(occ, tau).signal; }

/// Lower-branch solution of h(q) = ln 2 - rho, h the binary entropy in nats.
double solve_q_rho(double rho);

/// tau at which q_tau = u / (1 + u) equals q_rho, with u = exp(-2 / tau^2).
double matching_scale(double rho);

/// q_tau = 1 / (1 + exp(2 / tau^2)).
double q_of_tau(double tau);

inline constexpr int kSweepGridPoints = 641;

/// Uniform grid of `points` values of ln tau over [ln tau* - 0.5, ln tau* + 0.5].
std::vector<double> log_tau_grid(double tau_star, int points = kSweepGridPoints);

struct ProxyCurve {
  int d = 0;
  double rho = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
  double tau_star = 0.0;
  double q_rho = 0.0;
  std::vector<double> log_tau_grid;
  std::vector<double> median_signal;
  int clamp_events = 0;
  int resample_events = 0;
};

/// Median over `trials` occupancies (one per trial, shared across the grid).
ProxyCurve run_sweep(int d, double rho, int trials, std::uint64_t seed, int grid_points = kSweepGridPoints);

/// Pointwise median of equally long curves.
std::vector<double> median_curve(const std::vector<std::vector<double>>& curves);

/// Full width at half maximum in the grid variable, with linear interpolation
/// between grid points at the last up-crossing before and the first
/// down-crossing after the maximum.
double fwhm(std::span<const double> grid, std::span<const double> values);

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// OLS of fwhm against d^{-1/2}.
ScalingFit fit_scaling(std::span<const int> dims, std::span<const double> widths);

}  // namespace scorelab
