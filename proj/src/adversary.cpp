#include "scorelab/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mc_detail.hpp"
#include "scorelab/error.hpp"
#include "scorelab/info_metrics.hpp"
#include "scorelab/mixture_score.hpp"
#include "scorelab/numeric.hpp"

namespace scorelab {

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::lp: return "Lp";
    case Regime::psi1: return "Psi1";
    case Regime::exact: return "exact";
  }
  return "?";
}

Regime parse_regime(const std::string& text) {
  if (text == "Lp" || text == "lp") return Regime::lp;
  if (text == "Psi1" || text == "psi1") return Regime::psi1;
  if (text == "exact") return Regime::exact;
  throw ConfigError("unknown regime '" + text + "' (expected Lp, Psi1 or exact)");
}

std::string to_string(ThresholdMethod method) {
  return method == ThresholdMethod::monte_carlo ? "monte-carlo" : "saddlepoint";
}

std::string to_string(GateDecision decision) {
  return decision == GateDecision::null_locked ? "null-locked" : "mask-active";
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

double OracleProfile::zeta(double tau) const {
  const double scale = 4.0 * R * std::sqrt(static_cast<double>(d));
  switch (regime) {
    case Regime::lp: return std::min(0.5, std::pow(eps_err * tau / scale, p));
    case Regime::psi1: return std::min(0.25, 2.0 * std::exp(-0.5 * scale / (tau * eps_err)));
    case Regime::exact: return 0.5;
  }
  return 0.5;
}

double OracleProfile::theta(double tau) const {
  const double scale = 4.0 * R * std::sqrt(static_cast<double>(d));
  switch (regime) {
    case Regime::lp:
      if (p <= 2.0) return eps_err * eps_err / (tau * tau);
      return std::pow(eps_err / tau, p) * std::pow(tau * tau / scale, p - 2.0);
    case Regime::psi1:
      return R * R * d / (4.0 * std::pow(tau, 4)) * std::exp(-0.5 * scale / (tau * eps_err));
    case Regime::exact: return 0.0;
  }
  return 0.0;
}

double OracleProfile::tau_star() const { return 4.0 * R * std::sqrt(static_cast<double>(d)) / eps_err; }

namespace {

OracleProfile base_profile(const SupportSpec& spec, Regime regime, double eps_err, double rho, int Q) {
  require(eps_err > 0.0, "eps_err must be positive");
  require(rho > 0.0 && rho < 0.25, "rho must lie in (0, 1/4)");
  require(Q >= 1, "Q must be >= 1");
  OracleProfile profile;
  profile.regime = regime;
  profile.eps_err = eps_err;
  profile.rho = rho;
  profile.Q = Q;
  profile.R = spec.R;
  profile.d = spec.d;
  return profile;
}

}  // namespace

OracleProfile lp_profile(const SupportSpec& spec, double p, double eps_err, double rho, int Q) {
  require(p >= 2.0, "Lp profile needs p >= 2");
  auto profile = base_profile(spec, Regime::lp, eps_err, rho, Q);
  profile.p = p;
  return profile;
}

OracleProfile psi1_profile(const SupportSpec& spec, double eps_err, double rho, int Q) {
  return base_profile(spec, Regime::psi1, eps_err, rho, Q);
}

OracleProfile exact_profile(const SupportSpec& spec) {
  OracleProfile profile;
  profile.regime = Regime::exact;
  profile.R = spec.R;
  profile.d = spec.d;
  return profile;
}

// ---------------------------------------------------------------------------
// Thresholds
// ---------------------------------------------------------------------------

std::size_t min_threshold_samples(double zeta) {
  return static_cast<std::size_t>(std::ceil(100.0 / zeta));
}

ThresholdEstimate threshold_from_sorted_pool(std::span<const double> sorted, double zeta) {
  require(zeta > 0.0 && zeta <= 0.5, "zeta must lie in (0, 1/2]");
  require(!sorted.empty(), "empty sample pool");
  const std::size_t N = sorted.size();
  const double Nd = static_cast<double>(N);
  const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(zeta * Nd)), 1, N);
  const double spread = std::sqrt(Nd * zeta * (1.0 - zeta));
  const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor(static_cast<double>(k) - spread)));
  const auto hi = static_cast<std::size_t>(std::min(Nd, std::ceil(static_cast<double>(k) + spread)));
  ThresholdEstimate out;
  out.log_lambda = sorted[k - 1];
  out.samples = N;
  out.zeta = zeta;
  out.std_err = 0.5 * (sorted[hi - 1] - sorted[lo - 1]);
  return out;
}

ThresholdEstimate estimate_threshold(const SupportSpec& spec, double tau, double zeta, std::size_t samples,
                                     std::uint64_t seed) {
  require(zeta > 0.0 && zeta <= 0.5, "zeta must lie in (0, 1/2]");
  require(samples >= min_threshold_samples(zeta),
          "insufficient samples for the zeta-quantile: need at least ceil(100/zeta) = " +
              std::to_string(min_threshold_samples(zeta)));
  auto values = sample_log_likelihood_ratios(spec, tau, samples, seed);
  std::sort(values.begin(), values.end());
  return threshold_from_sorted_pool(values, zeta);
}

ThresholdEstimate estimate_threshold_auto(const SupportSpec& spec, double tau, double zeta, std::size_t budget,
                                          std::uint64_t seed) {
  const auto needed = min_threshold_samples(zeta);
  if (budget >= needed) return estimate_threshold(spec, tau, zeta, std::max(budget, needed), seed);
  return saddlepoint_threshold(spec, tau, zeta);
}

double mask_value(double ell_max, double log_lambda) {
  if (ell_max >= log_lambda) return 1.0;
  if (ell_max <= log_lambda - 1.0) return 0.0;
  return std::clamp(ell_max - log_lambda + 1.0, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Gate and oracle
// ---------------------------------------------------------------------------

GateResult gate_fisher(const Codebook& codebook, double tau, const OracleProfile& profile, std::size_t samples,
                       std::uint64_t seed) {
  require(samples >= 1000, "gate_fisher needs at least 1000 samples");
  const auto J = estimate_J(codebook, tau, samples, seed);
  GateResult out;
  out.J_estimate = J.value;
  out.std_err = J.std_err;
  out.samples = J.samples;
  out.theta = profile.theta(tau);
  out.decision = J.value <= out.theta ? GateDecision::null_locked : GateDecision::mask_active;
  return out;
}

namespace {

void require_noise_level(const SupportSpec& spec, double tau) {
  if (!(tau >= spec.gamma)) throw DomainError("total noise below base level");
}

// Shared answer logic. The gate is only consulted once the mask is known to be
// nonzero, which lets sessions defer the (costly) J estimate.
template <typename GateFn>
std::vector<double> masked_answer(const Codebook& codebook, double tau, std::span<const double> x,
                                  const OracleProfile& profile, double log_lambda, GateFn&& gate) {
  const auto& spec = codebook.spec;
  if (profile.regime == Regime::exact) return planted_eval(codebook, tau, x).score;
  if (profile.regime == Regime::psi1 && tau >= profile.tau_star()) return null_eval(spec, tau, x).score;
  const double m = mask_value(ell_max(codebook, tau, x).value, log_lambda);
  if (m == 0.0) return null_eval(spec, tau, x).score;
  if (gate().decision == GateDecision::null_locked) return null_eval(spec, tau, x).score;
  auto planted = planted_eval(codebook, tau, x);
  if (m == 1.0) return std::move(planted.score);
  const auto null = null_eval(spec, tau, x);
  std::vector<double> out(planted.score.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = null.score[i] + m * (planted.score[i] - null.score[i]);
  return out;
}

}  // namespace

std::vector<double> oracle_answer(const Codebook& codebook, double tau, std::span<const double> x,
                                  const OracleProfile& profile, const TauState& state) {
  require_noise_level(codebook.spec, tau);
  return masked_answer(codebook, tau, x, profile, state.threshold.log_lambda,
                       [&]() -> const GateResult& { return state.gate; });
}

ThresholdCache::ThresholdCache(SupportSpec spec, OracleProfile profile, std::size_t budget, std::uint64_t seed)
    : spec_(std::move(spec)), profile_(profile), budget_(budget), seed_(seed) {}

const ThresholdEstimate& ThresholdCache::at(double tau) {
  std::lock_guard lock(mutex_);
  auto it = cache_.find(tau);
  if (it == cache_.end()) {
    it = cache_.emplace(tau, estimate_threshold_auto(spec_, tau, profile_.zeta(tau), budget_, derive_seed(seed_, tau)))
             .first;
  }
  return it->second;
}

OracleSession::OracleSession(std::shared_ptr<const Codebook> codebook, OracleProfile profile, std::uint64_t seed,
                             SessionBudget budget, std::shared_ptr<ThresholdCache> thresholds)
    : spec_(codebook->spec),
      codebook_(std::move(codebook)),
      profile_(profile),
      seed_(seed),
      budget_(budget),
      thresholds_(std::move(thresholds)) {
  if (!thresholds_) {
    thresholds_ = std::make_shared<ThresholdCache>(spec_, profile_, budget_.threshold_samples,
                                                   derive_seed(seed_, std::uint64_t{0x7A}));
  }
}

OracleSession::OracleSession(SupportSpec spec, OracleProfile profile, std::uint64_t seed)
    : spec_(std::move(spec)), profile_(profile), seed_(seed) {}

const GateResult& OracleSession::gate_at(double tau) {
  std::lock_guard lock(mutex_);
  auto it = gates_.find(tau);
  if (it == gates_.end()) {
    const auto gate_seed = derive_seed(derive_seed(seed_, std::uint64_t{0x6A}), tau);
    it = gates_.emplace(tau, gate_fisher(*codebook_, tau, profile_, budget_.gate_samples, gate_seed)).first;
  }
  return it->second;
}

std::vector<double> OracleSession::answer(double tau, std::span<const double> x) {
  require_noise_level(spec_, tau);
  if (is_null()) return null_eval(spec_, tau, x).score;
  if (profile_.regime == Regime::exact) return planted_eval(*codebook_, tau, x).score;
  if (profile_.regime == Regime::psi1 && tau >= profile_.tau_star()) return null_eval(spec_, tau, x).score;
  return masked_answer(*codebook_, tau, x, profile_, thresholds_->at(tau).log_lambda,
                       [&]() -> const GateResult& { return gate_at(tau); });
}

TauState OracleSession::state(double tau) {
  require(!is_null(), "the null session has no threshold or gate");
  return {thresholds_->at(tau), gate_at(tau)};
}

// ---------------------------------------------------------------------------
// Accuracy audit
// ---------------------------------------------------------------------------

AccuracyAudit accuracy_audit(OracleSession& session, double tau, std::size_t samples, std::uint64_t seed,
                             int z_points) {
  require(samples >= 10000, "accuracy_audit needs at least 1e4 samples");
  require(!session.is_null(), "accuracy_audit needs a planted session");
  require(z_points >= 2, "accuracy_audit needs at least 2 z points");
  const auto& codebook = *session.codebook();
  const auto& spec = codebook.spec;
  const auto& profile = session.profile();
  const auto state = session.state(tau);

  struct Draw {
    double error = 0.0;
    bool good = false;
  };
  std::vector<Draw> draws(samples);
  parallel_for(chunk_count(samples), [&](std::size_t c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    std::vector<double> x(static_cast<std::size_t>(spec.d));
    const std::size_t begin = c * kMcChunk;
    const std::size_t end = std::min(samples, begin + kMcChunk);
    for (std::size_t i = begin; i < end; ++i) {
      sample_planted_point(codebook, tau, rng, x);
      const auto truth = planted_eval(codebook, tau, x).score;
      const auto answer = oracle_answer(codebook, tau, x, profile, state);
      draws[i].error = euclidean_distance(answer, truth);
      draws[i].good = ell_max(codebook, tau, x).value >= state.threshold.log_lambda;
    }
  });

  AccuracyAudit out;
  out.regime = profile.regime;
  out.tau = tau;
  out.gate = state.gate;
  out.log_lambda = state.threshold.log_lambda;
  out.samples = samples;

  std::vector<double> powered(samples);
  std::size_t good = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    powered[i] = std::pow(draws[i].error, profile.p);
    if (draws[i].good) {
      ++good;
      out.good_set_max_error = std::max(out.good_set_max_error, draws[i].error);
    }
  }
  const auto moment = mean_and_error(powered);
  out.lp_moment = moment.mean;
  out.lp_std_err = moment.std_err;
  out.lp_bound = std::pow(profile.eps_err / tau, profile.p);
  out.good_set_fraction = static_cast<double>(good) / static_cast<double>(samples);

  // z-grid out to twice the hard bound 2 R sqrt(d) / tau^2.
  const double z_max = 4.0 * spec.R * std::sqrt(static_cast<double>(spec.d)) / (tau * tau);
  std::vector<double> errors(samples);
  for (std::size_t i = 0; i < samples; ++i) errors[i] = draws[i].error;
  std::sort(errors.begin(), errors.end());
  for (int k = 0; k < z_points; ++k) {
    const double z = z_max * k / (z_points - 1);
    const auto above = static_cast<std::size_t>(errors.end() - std::upper_bound(errors.begin(), errors.end(), z));
    const double surv = static_cast<double>(above) / static_cast<double>(samples);
    out.z.push_back(z);
    out.survival.push_back(surv);
    out.survival_std_err.push_back(binomial_std_err(surv, samples));
    out.survival_bound.push_back(2.0 * std::exp(-z * tau / profile.eps_err));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rate window
// ---------------------------------------------------------------------------

RateWindow compute_window(const SupportSpec& spec, const OracleProfile& profile, double tau, std::size_t mc_budget,
                          std::uint64_t seed, double C) {
  require(profile.regime != Regime::exact, "rate windows need a masked profile");
  require(tau >= spec.gamma, "total noise below base level");
  require(C > 0.0, "window constant C must be positive");
  const double d = spec.d;
  RateWindow w;
  w.tau = tau;
  w.C = C;
  w.delta = profile.delta();
  w.zeta = profile.zeta(tau);
  w.theta = profile.theta(tau);
  w.alpha = 1.0 - spec.gamma * spec.gamma / (spec.R * spec.R * d * d);
  w.tau_tilde = std::sqrt(w.alpha) * tau;

  if (profile.regime == Regime::psi1 && tau >= profile.tau_star()) {
    w.kappa_minus = std::numeric_limits<double>::infinity();
    w.kappa_plus = -std::numeric_limits<double>::infinity();
    w.width = 0.0;
    return w;
  }

  const auto threshold =
      estimate_threshold_auto(spec, tau, w.zeta, mc_budget, derive_seed(seed, std::uint64_t{1}));
  w.log_lambda = threshold.log_lambda;
  w.method = threshold.method;
  w.kappa_minus = (w.log_lambda + std::log(w.delta) - 1.0) / d;

  const auto I = estimate_I(spec, w.tau_tilde, std::max<std::size_t>(mc_budget, 1000),
                            derive_seed(seed, std::uint64_t{2}));
  w.I_hat = I.value;
  w.I_std_err = I.std_err;
  const double inner = log1p_cardinality(spec) / w.delta * C * spec.R * spec.R * d * d /
                       (spec.gamma * spec.gamma * tau * tau * w.theta);
  w.H = std::max(1.0, std::log(inner));
  w.E_med = C * std::sqrt(d * w.H) + C * w.H;
  w.E_big = C * (spec.R / w.tau_tilde) * std::sqrt(d * w.H) + C * w.H;
  w.kappa_plus = w.I_hat + std::min(w.E_med, w.E_big) / d;
  w.width = std::max(w.kappa_plus - w.kappa_minus, 0.0);
  return w;
}

}  // namespace scorelab
