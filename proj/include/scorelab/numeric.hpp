#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace scorelab {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLn2 = std::numbers::ln2;
inline constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)

/// Streaming log-sum-exp with a running maximum.
class LogSumExp {
 public:
  void add(double a) {
    if (a == kNegInf) return;
    if (a <= max_) {
      sum_ += std::exp(a - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - a) + 1.0;
      max_ = a;
    }
  }
  double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

double log_sum_exp(std::span<const double> values);

/// ln(1 + e^a) without overflow.
double log1p_exp(double a);

/// ln(e^a + e^b).
double log_add_exp(double a, double b);

/// ln cosh(a), stable for large |a|.
double log_cosh(double a);

/// ln C(n, k) via lgamma.
double log_binomial(int n, int k);

/// ln(1 + e^{log_x}) for a value stored as a logarithm, e.g. ln(1 + |V|).
inline double log1p_from_log(double log_x) { return log1p_exp(log_x); }

double normal_cdf(double z);
double normal_pdf(double z);
/// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);

struct MeanAndError {
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t count = 0;
};

/// Sample mean and CLT standard error.
MeanAndError mean_and_error(std::span<const double> values);

/// Binomial standard error sqrt(p(1-p)/n).
double binomial_std_err(double p, std::size_t n);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of y on x.
LinearFit ordinary_least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace scorelab
