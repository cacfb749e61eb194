#include "scorelab/mixture_score.hpp"

#include <algorithm>
#include <cmath>

#include "scorelab/error.hpp"
#include "scorelab/numeric.hpp"

namespace scorelab {

namespace {

void require_point(const SupportSpec& spec, double tau, std::span<const double> x) {
  require(tau > 0.0, "noise level tau must be positive");
  require(x.size() == static_cast<std::size_t>(spec.d), "query point dimension does not match d");
}

}  // namespace

double log_gaussian_normalizer(int d, double tau) { return -0.5 * d * (kLog2Pi + 2.0 * std::log(tau)); }

double euclidean_norm(std::span<const double> v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

BlockExponents::BlockExponents(const SupportSpec& spec, double tau, std::span<const double> x)
    : M_(spec.M),
      exponents_(static_cast<std::size_t>(spec.block_count) * spec.M),
      block_lse_(static_cast<std::size_t>(spec.block_count)) {
  const double inv_two_var = 1.0 / (2.0 * tau * tau);
  const double log_m = std::log(static_cast<double>(M_));
  double total = 0.0;
  for (int j = 0; j < spec.block_count; ++j) {
    const double* xj = x.data() + static_cast<std::size_t>(j) * spec.block_dim;
    double* row = exponents_.data() + static_cast<std::size_t>(j) * M_;
    double hi = kNegInf;
    for (int k = 0; k < M_; ++k) {
      const auto a = spec.block_point(k);
      double dist2 = 0.0;
      for (int c = 0; c < spec.block_dim; ++c) dist2 += (xj[c] - a[c]) * (xj[c] - a[c]);
      row[k] = -dist2 * inv_two_var;
      hi = std::max(hi, row[k]);
    }
    double sum = 0.0;
    for (int k = 0; k < M_; ++k) sum += std::exp(row[k] - hi);
    block_lse_[static_cast<std::size_t>(j)] = hi + std::log(sum);
    total += block_lse_[static_cast<std::size_t>(j)] - log_m;
  }
  null_log_mass_ = total;
}

double BlockExponents::log_weight(std::span<const std::uint32_t> y) const {
  double s = 0.0;
  const double* row = exponents_.data();
  for (std::size_t j = 0; j < y.size(); ++j, row += M_) s += row[y[j]];
  return s;
}

ScoreEval planted_eval(const Codebook& codebook, double tau, std::span<const double> x) {
  const auto& spec = codebook.spec;
  require_point(spec, tau, x);
  require(codebook.n >= 1, "planted_eval: empty codebook");
  const BlockExponents table(spec, tau, x);

  std::vector<double> logw(codebook.n);
  double hi = kNegInf;
  for (std::size_t i = 0; i < codebook.n; ++i) {
    logw[i] = table.log_weight(codebook.point(i));
    hi = std::max(hi, logw[i]);
  }
  double sum = 0.0;
  for (auto& w : logw) {
    w = std::exp(w - hi);
    sum += w;
  }

  ScoreEval out;
  out.log_density = hi + std::log(sum) - std::log(static_cast<double>(codebook.n)) +
                    log_gaussian_normalizer(spec.d, tau);
  out.posterior_mean.assign(static_cast<std::size_t>(spec.d), 0.0);
  for (std::size_t i = 0; i < codebook.n; ++i) {
    const double w = logw[i] / sum;
    if (w == 0.0) continue;
    const auto y = codebook.point(i);
    for (int j = 0; j < spec.block_count; ++j) {
      const auto a = spec.block_point(static_cast<int>(y[j]));
      for (int c = 0; c < spec.block_dim; ++c) out.posterior_mean[static_cast<std::size_t>(j * spec.block_dim + c)] += w * a[c];
    }
  }
  const double inv_var = 1.0 / (tau * tau);
  out.score.resize(static_cast<std::size_t>(spec.d));
  for (int i = 0; i < spec.d; ++i) out.score[i] = (out.posterior_mean[i] - x[i]) * inv_var;
  return out;
}

ScoreEval null_eval(const SupportSpec& spec, double tau, std::span<const double> x) {
  require_point(spec, tau, x);
  const BlockExponents table(spec, tau, x);
  ScoreEval out;
  out.log_density = table.null_log_mass() + log_gaussian_normalizer(spec.d, tau);
  out.posterior_mean.assign(static_cast<std::size_t>(spec.d), 0.0);
  for (int j = 0; j < spec.block_count; ++j) {
    const double lse = table.block_log_mass(j);
    for (int k = 0; k < spec.M; ++k) {
      const double w = std::exp(table.exponent(j, k) - lse);
      const auto a = spec.block_point(k);
      for (int c = 0; c < spec.block_dim; ++c) out.posterior_mean[static_cast<std::size_t>(j * spec.block_dim + c)] += w * a[c];
    }
  }
  const double inv_var = 1.0 / (tau * tau);
  out.score.resize(static_cast<std::size_t>(spec.d));
  for (int i = 0; i < spec.d; ++i) out.score[i] = (out.posterior_mean[i] - x[i]) * inv_var;
  return out;
}

double log_likelihood_ratio(const SupportSpec& spec, std::span<const std::uint32_t> y, double tau,
                            std::span<const double> x) {
  require_point(spec, tau, x);
  require(y.size() == static_cast<std::size_t>(spec.block_count), "support point has wrong block count");
  return BlockExponents(spec, tau, x).log_likelihood_ratio(y);
}

std::vector<double> block_log_likelihood_ratios(const SupportSpec& spec, std::span<const std::uint32_t> y,
                                                double tau, std::span<const double> x) {
  require_point(spec, tau, x);
  const BlockExponents table(spec, tau, x);
  const double log_m = std::log(static_cast<double>(spec.M));
  std::vector<double> out(static_cast<std::size_t>(spec.block_count));
  for (int j = 0; j < spec.block_count; ++j)
    out[static_cast<std::size_t>(j)] = table.exponent(j, static_cast<int>(y[j])) - table.block_log_mass(j) + log_m;
  return out;
}

EllMax ell_max(const Codebook& codebook, double tau, std::span<const double> x) {
  require_point(codebook.spec, tau, x);
  const BlockExponents table(codebook.spec, tau, x);
  EllMax best{kNegInf, 0};
  for (std::size_t i = 0; i < codebook.n; ++i) {
    const double w = table.log_weight(codebook.point(i));
    if (w > best.value) best = {w, i};
  }
  best.value -= table.null_log_mass();
  return best;
}

double score_difference_bound_check(const SupportSpec& spec, const Codebook& codebook, double tau,
                                    std::span<const std::vector<double>> probes) {
  const double scale = tau * tau / (2.0 * spec.R * std::sqrt(static_cast<double>(spec.d)));
  double worst = 0.0;
  for (const auto& x : probes) {
    const auto planted = planted_eval(codebook, tau, x);
    const auto null = null_eval(spec, tau, x);
    worst = std::max(worst, euclidean_distance(planted.score, null.score) * scale);
  }
  return worst;
}

}  // namespace scorelab
