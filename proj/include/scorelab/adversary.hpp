#pragma once

// The masked adversarial oracle: accuracy profiles zeta(tau), theta(tau), the
// quantile threshold Lambda_tau(zeta), the Fisher-gap gate, per-instance
// oracle sessions, accuracy audits, and the informative rate window.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scorelab/codebook.hpp"

namespace scorelab {

/// lp and psi1 are the masked adversaries. exact answers the planted score
/// itself and serves as a truthful reference oracle.
enum class Regime { lp, psi1, exact };

std::string to_string(Regime regime);
Regime parse_regime(const std::string& text);

struct OracleProfile {
  Regime regime = Regime::lp;
  double p = 2.0;
  double eps_err = 1.0;
  double rho = 0.1;  // target error level
  int Q = 1;
  double R = 1.0;
  int d = 2;

  double zeta(double tau) const;
  double theta(double tau) const;
  /// 4 R sqrt(d) / eps_err; only meaningful for psi1.
  double tau_star() const;
  /// rho^2 / (80 Q).
  double delta() const { return rho * rho / (80.0 * Q); }
};

OracleProfile lp_profile(const SupportSpec& spec, double p, double eps_err, double rho, int Q);
OracleProfile psi1_profile(const SupportSpec& spec, double eps_err, double rho, int Q);
OracleProfile exact_profile(const SupportSpec& spec);

enum class ThresholdMethod { monte_carlo, saddlepoint };
std::string to_string(ThresholdMethod method);

struct ThresholdEstimate {
  double log_lambda = 0.0;
  std::size_t samples = 0;
  double zeta = 0.0;
  double std_err = 0.0;
  ThresholdMethod method = ThresholdMethod::monte_carlo;
};

/// Smallest sample count that resolves the zeta-quantile by 100 order statistics.
std::size_t min_threshold_samples(double zeta);

/// Lower empirical zeta-quantile (order statistic ceil(zeta N), 1-based) of
/// l_tau(Y, Y + Z). std_err is half the spread between the order statistics
/// one binomial standard deviation either side of the quantile index.
ThresholdEstimate estimate_threshold(const SupportSpec& spec, double tau, double zeta, std::size_t samples,
                                     std::uint64_t seed);

/// The same quantile rule applied to an already sorted pool.
ThresholdEstimate threshold_from_sorted_pool(std::span<const double> sorted, double zeta);

/// Lugannani-Rice saddlepoint approximation of the zeta-quantile of the block
/// sum, with the block cumulant generating function computed by quadrature.
ThresholdEstimate saddlepoint_threshold(const SupportSpec& spec, double tau, double zeta);

/// Monte Carlo when the budget resolves the quantile, saddlepoint otherwise.
ThresholdEstimate estimate_threshold_auto(const SupportSpec& spec, double tau, double zeta, std::size_t budget,
                                          std::uint64_t seed);

/// psi(l_max - ln Lambda + 1) with psi the clamp to [0, 1].
double mask_value(double ell_max, double log_lambda);

enum class GateDecision { null_locked, mask_active };
std::string to_string(GateDecision decision);

struct GateResult {
  GateDecision decision = GateDecision::null_locked;
  double J_estimate = 0.0;
  double std_err = 0.0;
  std::size_t samples = 0;
  double theta = 0.0;
};

GateResult gate_fisher(const Codebook& codebook, double tau, const OracleProfile& profile, std::size_t samples,
                       std::uint64_t seed);

/// Everything the oracle needs at one noise level.
struct TauState {
  ThresholdEstimate threshold;
  GateResult gate;
};

/// The masked oracle at total noise tau. tau < gamma is rejected.
std::vector<double> oracle_answer(const Codebook& codebook, double tau, std::span<const double> x,
                                  const OracleProfile& profile, const TauState& state);

struct SessionBudget {
  std::size_t threshold_samples = 200000;
  std::size_t gate_samples = 4096;
};

/// Per-tau thresholds for one support and profile. Lambda does not depend on
/// the codebook, so one cache can be shared by many sessions.
class ThresholdCache {
 public:
  ThresholdCache(SupportSpec spec, OracleProfile profile, std::size_t budget, std::uint64_t seed);
  const ThresholdEstimate& at(double tau);
  const SupportSpec& spec() const { return spec_; }
  const OracleProfile& profile() const { return profile_; }

 private:
  SupportSpec spec_;
  OracleProfile profile_;
  std::size_t budget_;
  std::uint64_t seed_;
  std::mutex mutex_;
  std::map<double, ThresholdEstimate> cache_;
};

/// A fixed oracle for one instance (planted codebook or the null). Per-tau
/// thresholds and gate decisions are computed on first use and then reused, so
/// the session is a deterministic function of (tau, x).
class OracleSession {
 public:
  /// Planted instance.
  OracleSession(std::shared_ptr<const Codebook> codebook, OracleProfile profile, std::uint64_t seed,
                SessionBudget budget = {}, std::shared_ptr<ThresholdCache> thresholds = nullptr);
  /// Null instance: always answers s_U.
  OracleSession(SupportSpec spec, OracleProfile profile, std::uint64_t seed);

  std::vector<double> answer(double tau, std::span<const double> x);
  /// Threshold and gate at tau, forcing both to be computed.
  TauState state(double tau);
  bool is_null() const { return codebook_ == nullptr; }
  const SupportSpec& spec() const { return spec_; }
  const OracleProfile& profile() const { return profile_; }
  const Codebook* codebook() const { return codebook_.get(); }

 private:
  const GateResult& gate_at(double tau);

  SupportSpec spec_;
  std::shared_ptr<const Codebook> codebook_;
  OracleProfile profile_;
  std::uint64_t seed_;
  SessionBudget budget_;
  std::shared_ptr<ThresholdCache> thresholds_;
  std::mutex mutex_;
  std::map<double, GateResult> gates_;
};

struct AccuracyAudit {
  Regime regime = Regime::lp;
  double tau = 0.0;
  GateResult gate;
  double log_lambda = 0.0;
  // Lp moment E ||s_hat - s_S||^p and its bound (eps/tau)^p.
  double lp_moment = 0.0;
  double lp_std_err = 0.0;
  double lp_bound = 0.0;
  // Largest error seen where l_max >= ln Lambda (the good set).
  double good_set_max_error = 0.0;
  double good_set_fraction = 0.0;
  // psi1 survival P[||s_hat - s_S|| > z] against 2 exp(-z tau / eps).
  std::vector<double> z;
  std::vector<double> survival;
  std::vector<double> survival_std_err;
  std::vector<double> survival_bound;
  std::size_t samples = 0;
};

AccuracyAudit accuracy_audit(OracleSession& session, double tau, std::size_t samples, std::uint64_t seed,
                             int z_points = 40);

struct RateWindow {
  double tau = 0.0;
  double kappa_minus = 0.0;
  double kappa_plus = 0.0;
  double width = 0.0;
  double I_hat = 0.0;
  double I_std_err = 0.0;
  double log_lambda = 0.0;
  double H = 0.0;
  double E_med = 0.0;
  double E_big = 0.0;
  double tau_tilde = 0.0;
  double alpha = 0.0;
  double delta = 0.0;
  double zeta = 0.0;
  double theta = 0.0;
  double C = 4.0;
  ThresholdMethod method = ThresholdMethod::monte_carlo;
  bool empty() const { return kappa_minus > kappa_plus; }
};

/// [kappa_-(tau), kappa_+(tau)]. A psi1 profile at tau >= tau_star has no
/// informative rates and returns an empty window.
RateWindow compute_window(const SupportSpec& spec, const OracleProfile& profile, double tau, std::size_t mc_budget,
                          std::uint64_t seed, double C = 4.0);

}  // namespace scorelab
