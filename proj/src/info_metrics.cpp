#include "scorelab/info_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mc_detail.hpp"
#include "scorelab/error.hpp"
#include "scorelab/mixture_score.hpp"
#include "scorelab/numeric.hpp"

namespace scorelab {

namespace {

// Draw Y ~ U (as block indices) and x = Y + tau N.
void draw_null_pair(const SupportSpec& spec, double tau, Rng& rng, std::vector<std::uint32_t>& y,
                    std::vector<double>& x) {
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(spec.M - 1));
  std::normal_distribution<double> normal;
  for (int j = 0; j < spec.block_count; ++j) {
    y[static_cast<std::size_t>(j)] = pick(rng);
    const auto a = spec.block_point(static_cast<int>(y[static_cast<std::size_t>(j)]));
    for (int c = 0; c < spec.block_dim; ++c) x[static_cast<std::size_t>(j * spec.block_dim + c)] = a[c] + tau * normal(rng);
  }
}

InfoEstimate make_estimate(std::span<const double> values, Quantity quantity, double scale = 1.0) {
  const auto me = mean_and_error(values);
  return {me.mean * scale, me.std_err * scale, values.size(), quantity};
}

}  // namespace

std::string to_string(Quantity q) {
  switch (q) {
    case Quantity::I_tau: return "I_tau";
    case Quantity::J_tau: return "J_tau";
    case Quantity::KL: return "KL";
    case Quantity::block_psi1_norm: return "block_psi1_norm";
  }
  return "?";
}

void sample_planted_point(const Codebook& codebook, double tau, Rng& rng, std::span<double> x) {
  const auto& spec = codebook.spec;
  std::uniform_int_distribution<std::size_t> pick(0, codebook.n - 1);
  std::normal_distribution<double> normal;
  const auto y = codebook.point(pick(rng));
  for (int j = 0; j < spec.block_count; ++j) {
    const auto a = spec.block_point(static_cast<int>(y[static_cast<std::size_t>(j)]));
    for (int c = 0; c < spec.block_dim; ++c) x[static_cast<std::size_t>(j * spec.block_dim + c)] = a[c] + tau * normal(rng);
  }
}

std::vector<double> sample_log_likelihood_ratios(const SupportSpec& spec, double tau, std::size_t samples,
                                                 std::uint64_t seed) {
  require(tau > 0.0, "tau must be positive");
  return detail::draw_values(samples, seed, [&] {
    return [&spec, tau, y = std::vector<std::uint32_t>(static_cast<std::size_t>(spec.block_count)),
            x = std::vector<double>(static_cast<std::size_t>(spec.d))](Rng& rng) mutable {
      draw_null_pair(spec, tau, rng, y, x);
      return BlockExponents(spec, tau, x).log_likelihood_ratio(y);
    };
  });
}

std::vector<double> sample_block_log_likelihood_ratios(const SupportSpec& spec, double tau, std::size_t samples,
                                                       std::uint64_t seed) {
  require(tau > 0.0, "tau must be positive");
  // A one-block support with the same geometry.
  SupportSpec block = spec;
  block.d = spec.block_dim;
  block.block_count = 1;
  return sample_log_likelihood_ratios(block, tau, samples, seed);
}

InfoEstimate estimate_I(const SupportSpec& spec, double tau, std::size_t samples, std::uint64_t seed) {
  require(samples >= 1000, "estimate_I needs at least 1000 samples");
  const auto values = sample_log_likelihood_ratios(spec, tau, samples, seed);
  return make_estimate(values, Quantity::I_tau, 1.0 / spec.d);
}

InfoEstimate estimate_J(const Codebook& codebook, double tau, std::size_t samples, std::uint64_t seed) {
  require(samples >= 1, "estimate_J needs samples");
  const auto& spec = codebook.spec;
  const auto values = detail::draw_values(samples, seed, [&] {
    return [&, x = std::vector<double>(static_cast<std::size_t>(spec.d))](Rng& rng) mutable {
      sample_planted_point(codebook, tau, rng, x);
      const auto planted = planted_eval(codebook, tau, x);
      const auto null = null_eval(spec, tau, x);
      const double dist = euclidean_distance(planted.score, null.score);
      return dist * dist;
    };
  });
  return make_estimate(values, Quantity::J_tau);
}

InfoEstimate estimate_KL(const Codebook& codebook, double tau, std::size_t samples, std::uint64_t seed) {
  require(samples >= 1, "estimate_KL needs samples");
  const auto& spec = codebook.spec;
  const auto values = detail::draw_values(samples, seed, [&] {
    return [&, x = std::vector<double>(static_cast<std::size_t>(spec.d))](Rng& rng) mutable {
      sample_planted_point(codebook, tau, rng, x);
      return planted_eval(codebook, tau, x).log_density - null_eval(spec, tau, x).log_density;
    };
  });
  return make_estimate(values, Quantity::KL);
}

double kl_quadrature(const Codebook& codebook, double tau, int points_per_axis) {
  const auto& spec = codebook.spec;
  require(spec.d <= 4, "kl_quadrature is limited to d <= 4");
  require(points_per_axis >= 2, "kl_quadrature needs >= 2 points per axis");
  const double half = spec.R + 4.0 * std::max(1.0, tau);
  const double h = 2.0 * half / points_per_axis;
  std::size_t cells = 1;
  for (int i = 0; i < spec.d; ++i) cells *= static_cast<std::size_t>(points_per_axis);
  std::vector<double> partial(chunk_count(cells), 0.0);
  parallel_for(partial.size(), [&](std::size_t c) {
    std::vector<double> x(static_cast<std::size_t>(spec.d));
    const std::size_t begin = c * kMcChunk;
    const std::size_t end = std::min(cells, begin + kMcChunk);
    double acc = 0.0;
    for (std::size_t cell = begin; cell < end; ++cell) {
      std::size_t rest = cell;
      for (int i = 0; i < spec.d; ++i) {
        x[static_cast<std::size_t>(i)] = -half + (static_cast<double>(rest % points_per_axis) + 0.5) * h;
        rest /= static_cast<std::size_t>(points_per_axis);
      }
      const double lp = planted_eval(codebook, tau, x).log_density;
      const double lu = null_eval(spec, tau, x).log_density;
      acc += std::exp(lp) * (lp - lu);
    }
    partial[c] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total * std::pow(h, spec.d);
}

DeBruijnCheck debruijn_check(const Codebook& codebook, double tau, double dt_rel, std::size_t samples,
                             std::uint64_t seed) {
  require(dt_rel >= 1e-3 && dt_rel <= 1e-1, "debruijn_check: dt_rel must lie in [1e-3, 1e-1]");
  const auto& spec = codebook.spec;
  const double t = tau * tau;
  const double dt = dt_rel * t;
  const double tau_hi = std::sqrt(t + dt);
  const double tau_lo = std::sqrt(t - dt);
  // Paired draws: the same codeword and standard normal at both noise levels.
  const auto diffs = detail::draw_values(samples, seed, [&] {
    return [&, n = std::vector<double>(static_cast<std::size_t>(spec.d)),
            x = std::vector<double>(static_cast<std::size_t>(spec.d))](Rng& rng) mutable {
      std::uniform_int_distribution<std::size_t> pick(0, codebook.n - 1);
      std::normal_distribution<double> normal;
      const auto y = codebook.decode(pick(rng));
      for (auto& v : n) v = normal(rng);
      auto gap_at = [&](double s) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = y[i] + s * n[i];
        return planted_eval(codebook, s, x).log_density - null_eval(spec, s, x).log_density;
      };
      return (gap_at(tau_hi) - gap_at(tau_lo)) / (2.0 * dt);
    };
  });
  const auto slope = mean_and_error(diffs);
  const auto J = estimate_J(codebook, tau, samples, seed);
  DeBruijnCheck out;
  out.dD_dt = slope.mean;
  out.dD_dt_std_err = slope.std_err;
  out.minus_half_J = -0.5 * J.value;
  out.J_std_err = J.std_err;
  out.rel_gap = J.value > 0.0 ? std::abs(out.dD_dt - out.minus_half_J) / J.value : std::abs(out.dD_dt);
  return out;
}

OneShotKlAudit one_shot_kl_audit(const SupportSpec& spec, std::size_t n, double tau, double a, int trials,
                                 std::size_t samples, std::uint64_t seed, bool quadrature_if_small,
                                 int quadrature_points) {
  require(trials >= 20, "one_shot_kl_audit needs at least 20 trials");
  require(a >= 0.0, "one_shot_kl_audit: a must be nonnegative");
  OneShotKlAudit out;
  out.used_quadrature = quadrature_if_small && spec.d <= 4;
  std::vector<double> kls(static_cast<std::size_t>(trials));
  for (int i = 0; i < trials; ++i) {
    const auto cb = sample_codebook(spec, n, derive_seed(seed, static_cast<std::uint64_t>(2 * i)));
    kls[static_cast<std::size_t>(i)] =
        out.used_quadrature ? kl_quadrature(cb, tau, quadrature_points)
                            : estimate_KL(cb, tau, samples, derive_seed(seed, static_cast<std::uint64_t>(2 * i + 1))).value;
  }
  const auto lhs = mean_and_error(kls);
  out.lhs_mean = lhs.mean;
  out.lhs_std_err = lhs.std_err;

  const double cutoff = std::log(static_cast<double>(n)) - a;
  const auto ells = sample_log_likelihood_ratios(spec, tau, samples, derive_seed(seed, std::uint64_t{0xA11}));
  const auto hits = std::count_if(ells.begin(), ells.end(), [&](double v) { return v >= cutoff; });
  out.tail_probability = static_cast<double>(hits) / static_cast<double>(ells.size());
  out.tail_std_err = binomial_std_err(out.tail_probability, ells.size());
  const double log1p_v = log1p_cardinality(spec);
  out.rhs_bound = std::exp(-a) + log1p_v * out.tail_probability;
  out.combined_std_err = std::hypot(out.lhs_std_err, log1p_v * out.tail_std_err);
  out.holds = out.lhs_mean <= out.rhs_bound + 3.0 * out.combined_std_err;
  return out;
}

double empirical_psi1_norm(std::span<const double> values, double tolerance) {
  if (values.empty()) return 0.0;
  const auto me = mean_and_error(values);
  double spread = 0.0;
  for (double v : values) spread = std::max(spread, std::abs(v - me.mean));
  if (spread == 0.0) return 0.0;
  auto orlicz = [&](double K) {
    double s = 0.0;
    for (double v : values) s += std::exp(std::abs(v - me.mean) / K);
    return s / static_cast<double>(values.size());
  };
  // At K = spread / ln 2 every term is <= 2.
  double hi = spread / kLn2;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = orlicz(mid);
    if (f <= 2.0) hi = mid; else lo = mid;
    if (std::abs(f - 2.0) <= tolerance && f <= 2.0) break;
    if (hi - lo <= 1e-12 * hi) break;
  }
  return hi;
}

ConcentrationAudit concentration_audit(const SupportSpec& spec, double tau, std::size_t samples,
                                       std::uint64_t seed) {
  require(samples >= 100000, "concentration_audit needs at least 1e5 samples");
  ConcentrationAudit out;
  const auto blocks = sample_block_log_likelihood_ratios(spec, tau, samples, derive_seed(seed, std::uint64_t{1}));
  out.block_psi1_norm = empirical_psi1_norm(blocks);

  auto ells = sample_log_likelihood_ratios(spec, tau, samples, derive_seed(seed, std::uint64_t{2}));
  const auto me = mean_and_error(ells);
  out.mean_ell = me.mean;
  out.sd_ell = me.std_err * std::sqrt(static_cast<double>(ells.size()));
  out.lipschitz_slope_bound = -tau * tau / (8.0 * spec.R * spec.R * spec.d);
  if (out.sd_ell == 0.0) return out;

  for (auto& v : ells) v -= me.mean;
  std::sort(ells.begin(), ells.end(), std::greater<>());
  // Fit range: from half a standard deviation out to the level still holding
  // 100 exceedances.
  const double t_lo = 0.5 * out.sd_ell;
  const double t_hi = ells[std::min<std::size_t>(99, ells.size() - 1)];
  if (!(t_hi > t_lo)) return out;
  std::vector<double> t2, log_surv;
  constexpr int kFitPoints = 24;
  for (int i = 0; i < kFitPoints; ++i) {
    const double t = t_lo + (t_hi - t_lo) * i / (kFitPoints - 1);
    const auto count = static_cast<std::size_t>(
        std::upper_bound(ells.begin(), ells.end(), t, std::greater<>()) - ells.begin());
    if (count == 0) continue;
    t2.push_back(t * t);
    log_surv.push_back(std::log(static_cast<double>(count) / static_cast<double>(ells.size())));
  }
  if (t2.size() >= 3) {
    const auto fit = ordinary_least_squares(t2, log_surv);
    out.tail_slope = fit.slope;
    out.tail_intercept = fit.intercept;
    out.tail_r_squared = fit.r_squared;
    out.fit_points = t2.size();
  }
  return out;
}

SmallNoiseCheck small_noise_I_check(const SupportSpec& spec, std::size_t samples, std::uint64_t seed) {
  require(spec.kind == SupportKind::product_circle, "small_noise_I_check requires a product-circle support");
  const auto I = estimate_I(spec, spec.gamma, samples, seed);
  SmallNoiseCheck out;
  out.I_gamma = I.value;
  out.std_err = I.std_err;
  out.threshold = 0.1 * std::log(static_cast<double>(spec.M));
  out.holds = out.I_gamma >= out.threshold - 3.0 * out.std_err;
  return out;
}

FisherKlRatio fisher_kl_ratio(const Codebook& codebook, double tau, std::size_t samples, std::uint64_t seed) {
  const auto& spec = codebook.spec;
  const double d = spec.d;
  const double alpha = 1.0 - spec.gamma * spec.gamma / (spec.R * spec.R * d * d);
  FisherKlRatio out;
  out.tau_tilde = std::sqrt(alpha) * tau;
  out.J = estimate_J(codebook, tau, samples, seed).value;
  out.kl_at_tilde = estimate_KL(codebook, out.tau_tilde, samples, seed).value;
  const double scale = spec.R * spec.R * d * d / (spec.gamma * spec.gamma * tau * tau);
  out.ratio = out.kl_at_tilde > 0.0 ? out.J / (scale * out.kl_at_tilde) : 0.0;
  return out;
}

}  // namespace scorelab
