#include "harness/stats.hpp"

#include <cmath>
#include <limits>

#include "harness/error.hpp"

namespace harness {

double Estimate::z(double target) const {
  const double d = std::abs(mean - target);
  if (stderr_ > 0.0) return d / stderr_;
  return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

void Accumulator::add(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

void Accumulator::merge(const Accumulator& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double n = static_cast<double>(n_ + o.n_);
  const double delta = o.mean_ - mean_;
  mean_ += delta * static_cast<double>(o.n_) / n;
  m2_ += o.m2_ + delta * delta * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
  n_ += o.n_;
}

Estimate Accumulator::result() const {
  if (n_ < 2) throw Error(ErrorKind::TooFewSamples, "need at least two samples");
  Estimate e;
  e.count = n_;
  e.mean = mean_;
  e.variance = m2_ / static_cast<double>(n_ - 1);
  e.stderr_ = std::sqrt(e.variance / static_cast<double>(n_));
  e.ci99 = 2.576 * e.stderr_;
  return e;
}

Estimate estimate(std::span<const double> samples) {
  Accumulator acc;
  for (double x : samples) {
    if (!std::isfinite(x)) throw Error(ErrorKind::TooFewSamples, "non-finite sample");
    acc.add(x);
  }
  return acc.result();
}

double variance_stderr(std::span<const double> samples) {
  const Estimate e = estimate(samples);
  double m4 = 0.0;
  for (double x : samples) m4 += std::pow(x - e.mean, 4);
  const double n = static_cast<double>(samples.size());
  m4 /= n;
  // Var(s^2) ~ (mu4 - sigma^4 (n-3)/(n-1)) / n
  const double v = (m4 - e.variance * e.variance * (n - 3.0) / (n - 1.0)) / n;
  return std::sqrt(std::max(v, 0.0));
}

PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points, double s_min) {
  std::vector<double> xs, ys;
  for (const auto& [s, y] : points) {
    if (s < s_min) continue;
    if (!(s > 0.0) || !(y > 0.0)) throw Error(ErrorKind::NonPositiveData, "log-log fit needs s, y > 0");
    xs.push_back(std::log(s));
    ys.push_back(std::log(y));
  }
  if (xs.size() < 4) throw Error(ErrorKind::TooFewPoints, "need at least four points with s >= sMin");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  PowerLawFit fit;
  fit.points = xs.size();
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit.intercept - fit.exponent * xs[i];
    rss += r * r;
  }
  fit.stderr_ = std::sqrt(rss / (n - 2.0) / sxx);
  return fit;
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                    double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, int max_depth) {
  if (b == a) return 0.0;
  const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  // Relative tolerance anchored on a coarse first pass.
  const double scale = std::max(std::abs(whole), 1e-300);
  return simpson_step(f, a, b, fa, fm, fb, whole, rel_tol * scale, max_depth);
}

}  // namespace harness
