#pragma once

// Exact smoothed log-densities and scores of the planted mixture nu_{S,tau} and
// the blockwise-factorized null nu_{U,tau}. Scores come from posterior means
// (Tweedie): s(x) = (m(x) - x) / tau^2. All accumulation is in log-space.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scorelab/codebook.hpp"

namespace scorelab {

struct ScoreEval {
  double log_density = 0.0;
  std::vector<double> score;
  std::vector<double> posterior_mean;
};

/// -(d/2) ln(2 pi tau^2).
double log_gaussian_normalizer(int d, double tau);

/// Per-block Gaussian exponents -||x_j - a_k||^2 / (2 tau^2) for one query point,
/// together with the per-block null log-masses. Everything that depends on a
/// single x is computed once here in O(d M).
class BlockExponents {
 public:
  BlockExponents(const SupportSpec& spec, double tau, std::span<const double> x);

  /// -||x - y||^2 / (2 tau^2) for a support point given by block indices.
  double log_weight(std::span<const std::uint32_t> y) const;
  /// ln E_{Y~U} exp(-||x - Y||^2 / (2 tau^2)) = sum_j (LSE_k e_jk - ln M).
  double null_log_mass() const { return null_log_mass_; }
  /// l_tau(y, x) = ln phi(x - y) - ln u_tau(x).
  double log_likelihood_ratio(std::span<const std::uint32_t> y) const {
    return log_weight(y) - null_log_mass_;
  }
  double exponent(int block, int k) const { return exponents_[static_cast<std::size_t>(block) * M_ + k]; }
  double block_log_mass(int block) const { return block_lse_[static_cast<std::size_t>(block)]; }
  int points_per_block() const { return M_; }

 private:
  int M_;
  std::vector<double> exponents_;  // block_count x M
  std::vector<double> block_lse_;
  double null_log_mass_ = 0.0;
};

/// Exact evaluation of the planted mixture (1/n) sum_i N(Y_i, tau^2 I) at x.
ScoreEval planted_eval(const Codebook& codebook, double tau, std::span<const double> x);

/// Null mixture U * N(0, tau^2 I), evaluated blockwise in O(d M).
ScoreEval null_eval(const SupportSpec& spec, double tau, std::span<const double> x);

/// l_tau(y, x) = ln phi_{tau^2}(x - y) - ln u_tau(x); a sum of block terms.
double log_likelihood_ratio(const SupportSpec& spec, std::span<const std::uint32_t> y, double tau,
                            std::span<const double> x);

/// The individual block terms of l_tau(y, x).
std::vector<double> block_log_likelihood_ratios(const SupportSpec& spec, std::span<const std::uint32_t> y,
                                                double tau, std::span<const double> x);

struct EllMax {
  double value = 0.0;
  std::size_t index = 0;
};

/// max_{y in S} l_tau(y, x) and the first index attaining it.
EllMax ell_max(const Codebook& codebook, double tau, std::span<const double> x);

/// max over probes of ||s_S - s_U||_2 tau^2 / (2 R sqrt(d)); never exceeds 1.
double score_difference_bound_check(const SupportSpec& spec, const Codebook& codebook, double tau,
                                    std::span<const std::vector<double>> probes);

double euclidean_norm(std::span<const double> v);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace scorelab
