#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace harness {

struct Estimate {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t count = 0;
  double stderr_ = 0.0;
  double ci99 = 0.0;  // 2.576 * stderr

  /// |mean - target| in units of the standard error (inf if stderr is 0 and they differ).
  double z(double target) const;
};

/// Unbiased mean and variance. Throws TooFewSamples below two samples.
Estimate estimate(std::span<const double> samples);

/// Running mean/variance (Welford); mergeable for ordered reductions.
class Accumulator {
 public:
  void add(double x);
  void merge(const Accumulator& other);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  Estimate result() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct PowerLawFit {
  double exponent = 0.0;
  double stderr_ = 0.0;
  double intercept = 0.0;  // log of the prefactor
  std::size_t points = 0;
};

/// Least-squares slope of log y on log s over points with s >= s_min.
PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points, double s_min = 0.0);

/// Adaptive Simpson on [a, b] with relative tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-4, int max_depth = 40);

/// Standard error of a sample variance, from the fourth central moment.
double variance_stderr(std::span<const double> samples);

}  // namespace harness
