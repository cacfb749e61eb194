#include "scorelab/numeric.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "scorelab/error.hpp"
#include "scorelab/random.hpp"

namespace scorelab {

double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  if (std::isinf(hi)) return hi;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

double log1p_exp(double a) {
  if (a > 0) return a + std::log1p(std::exp(-a));
  return std::log1p(std::exp(a));
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

double log_cosh(double a) {
  const double x = std::abs(a);
  return x + std::log1p(std::exp(-2.0 * x)) - kLn2;
}

double log_binomial(int n, int k) {
  require(n >= 0 && k >= 0 && k <= n, "log_binomial: need 0 <= k <= n");
  if (k == 0 || k == n) return 0.0;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "normal_quantile needs p in (0, 1)");
  double lo = -40.0;
  double hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

MeanAndError mean_and_error(std::span<const double> values) {
  MeanAndError out;
  out.count = values.size();
  if (values.empty()) return out;
  // Two-pass for accuracy.
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double var = ss / static_cast<double>(values.size() - 1);
  out.std_err = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

double binomial_std_err(double p, std::size_t n) {
  if (n == 0) return 0.0;
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

LinearFit ordinary_least_squares(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "ordinary_least_squares: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "ordinary_least_squares: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

std::uint64_t derive_seed(std::uint64_t master, double key) {
  return derive_seed(master, std::bit_cast<std::uint64_t>(key));
}

}  // namespace scorelab
