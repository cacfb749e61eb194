#pragma once

// Monte Carlo estimators and audits for the information quantities of the hard
// family: I_tau, J_tau(S), KL(nu_S,tau || nu_U,tau), the de Bruijn identity,
// the one-shot KL bound, and log-likelihood concentration.
//
// All estimators are deterministic given their seed. Samples are drawn in
// fixed chunks of kMcChunk with per-chunk seeds, and draws are built from
// standard normals scaled by tau, so equal seeds give common random numbers
// across a tau-grid.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "scorelab/codebook.hpp"
#include "scorelab/random.hpp"

namespace scorelab {

enum class Quantity { I_tau, J_tau, KL, block_psi1_norm };

std::string to_string(Quantity q);

struct InfoEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::size_t samples = 0;
  Quantity quantity = Quantity::I_tau;
};

/// Draws X ~ nu_{S,tau}: a uniformly chosen codeword plus N(0, tau^2 I).
void sample_planted_point(const Codebook& codebook, double tau, Rng& rng, std::span<double> x);

/// i.i.d. draws of l_tau(Y, Y + Z) with Y ~ U, Z ~ N(0, tau^2 I), in draw order.
std::vector<double> sample_log_likelihood_ratios(const SupportSpec& spec, double tau, std::size_t samples,
                                                 std::uint64_t seed);

/// i.i.d. draws of a single block's contribution to l_tau.
std::vector<double> sample_block_log_likelihood_ratios(const SupportSpec& spec, double tau, std::size_t samples,
                                                       std::uint64_t seed);

/// I_tau = E[l_tau] / d.
InfoEstimate estimate_I(const SupportSpec& spec, double tau, std::size_t samples, std::uint64_t seed);

/// J_tau(S) = E_{X ~ nu_S,tau} ||s_S(X) - s_U(X)||^2.
InfoEstimate estimate_J(const Codebook& codebook, double tau, std::size_t samples, std::uint64_t seed);

/// KL(nu_S,tau || nu_U,tau) as the mean log-density gap under X ~ nu_S,tau.
InfoEstimate estimate_KL(const Codebook& codebook, double tau, std::size_t samples, std::uint64_t seed);

/// Deterministic KL by a midpoint tensor grid (points_per_axis^d cells) over
/// [-(R + 4 max(1,tau)), R + 4 max(1,tau)]^d. Only for d <= 4.
double kl_quadrature(const Codebook& codebook, double tau, int points_per_axis = 64);

struct DeBruijnCheck {
  double dD_dt = 0.0;
  double dD_dt_std_err = 0.0;
  double minus_half_J = 0.0;
  double J_std_err = 0.0;
  double rel_gap = 0.0;  // |dD/dt + J/2| / J
};

/// Central difference of D(t) = KL at t = tau^2 +- dt_rel t, against -J/2.
DeBruijnCheck debruijn_check(const Codebook& codebook, double tau, double dt_rel, std::size_t samples,
                             std::uint64_t seed);

struct OneShotKlAudit {
  double lhs_mean = 0.0;
  double lhs_std_err = 0.0;
  double tail_probability = 0.0;
  double tail_std_err = 0.0;
  double rhs_bound = 0.0;
  double combined_std_err = 0.0;
  bool holds = false;
  bool used_quadrature = false;
};

/// E_S KL(nu_S,tau || nu_U,tau) <= e^{-a} + ln(1+|V|) P[l_tau >= ln n - a],
/// with the left side averaged over `trials` fresh codebooks. For d <= 4 the
/// per-codebook KL may come from kl_quadrature at the given resolution.
OneShotKlAudit one_shot_kl_audit(const SupportSpec& spec, std::size_t n, double tau, double a, int trials,
                                 std::size_t samples, std::uint64_t seed, bool quadrature_if_small = false,
                                 int quadrature_points = 64);

struct ConcentrationAudit {
  double block_psi1_norm = 0.0;  // smallest K with E exp(|b - mean| / K) <= 2
  double mean_ell = 0.0;         // d I_tau
  double sd_ell = 0.0;
  double tail_slope = 0.0;       // fit of ln P[l - dI >= t] against t^2
  double tail_intercept = 0.0;
  double tail_r_squared = 0.0;
  double lipschitz_slope_bound = 0.0;  // -tau^2 / (8 R^2 d)
  std::size_t fit_points = 0;
};

ConcentrationAudit concentration_audit(const SupportSpec& spec, double tau, std::size_t samples,
                                       std::uint64_t seed);

/// Empirical Orlicz psi_1 norm of centered values, by bisection.
double empirical_psi1_norm(std::span<const double> values, double tolerance = 1e-3);

struct SmallNoiseCheck {
  double I_gamma = 0.0;
  double std_err = 0.0;
  double threshold = 0.0;  // ln(M) / 10
  bool holds = false;
};

/// I at tau = gamma against (1/10) ln M on a product-circle support.
SmallNoiseCheck small_noise_I_check(const SupportSpec& spec, std::size_t samples, std::uint64_t seed);

struct FisherKlRatio {
  double J = 0.0;
  double kl_at_tilde = 0.0;
  double tau_tilde = 0.0;
  double ratio = 0.0;  // J / ((R^2 d^2 / (gamma^2 tau^2)) KL(tau~))
};

/// Observed constant in J_tau <= C R^2 d^2 / (gamma^2 tau^2) KL(nu_S,tau~ || nu_U,tau~).
FisherKlRatio fisher_kl_ratio(const Codebook& codebook, double tau, std::size_t samples, std::uint64_t seed);

}  // namespace scorelab
