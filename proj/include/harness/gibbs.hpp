#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "harness/events.hpp"
#include "harness/lattice.hpp"

namespace harness {

/// Gaussian field on the free (non-pinned) carrier sites with precision
/// Q = I - P restricted to those sites; Q has unit diagonal, so every
/// conditional variance is 1 and Sigma = Q^{-1} is the absorbed-walk Green's function.
struct GibbsModel {
  Kernel kernel;
  Region region;
  std::vector<int> free_sites;       // carrier indices, increasing
  std::vector<int> free_index;       // carrier index -> position in free_sites or -1
  Eigen::MatrixXd precision;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd factor;            // lower-triangular, factor * factor^T = covariance

  std::size_t dim() const { return free_sites.size(); }
  /// Free-site values of a carrier field.
  Eigen::VectorXd restrict(const HeightField& field) const;
  /// Carrier field with pinned sites at 0.
  HeightField embed(const Eigen::VectorXd& values) const;
};

/// Throws AsymmetricKernel, SelfLoopKernel or NoEscape.
GibbsModel build_model(const Kernel& k, const Region& region);

/// Transition matrix of the dynamics restricted to the free sites (fixed
/// boundary: mass leaving the free set is dropped; free boundary: renormalised).
Eigen::MatrixXd restricted_transition(const Kernel& k, const Region& region,
                                      std::vector<int>* free_sites = nullptr);

/// One Green's-function entry G(i, j) of the absorbed walk, by a sparse
/// solve; for carriers too large for build_model's dense inverse.
double green_entry(const Kernel& k, const Region& region, const Site& i, const Site& j);

/// -1/2 x^T Q x. Throws DimensionMismatch.
double log_density(const GibbsModel& model, std::span<const double> free_values);
double log_density(const GibbsModel& model, const HeightField& field);

std::vector<HeightField> sample_field(const GibbsModel& model, int n, std::uint64_t seed);

/// Draw with an arbitrary covariance over the free sites (controls and tests).
HeightField sample_with(const GibbsModel& model, const Eigen::MatrixXd& factor, std::uint64_t key);

/// -Q(site, j) / Q(site, site) for free j != site with nonzero entry.
SiteWeights conditional_mean_weights(const GibbsModel& model, const Site& site);

/// Stationary covariance of the heat-bath dynamics with unit noise on the free
/// sites, for any (possibly asymmetric) kernel: solves
/// A S + S A^T - diag(A S A^T) = sigma^2 I with A = I - P.
Eigen::MatrixXd stationary_covariance(const Kernel& k, const Region& region);

/// A probe is a coordinate value (b < 0) or a product of two coordinates,
/// indices into the model's free sites.
struct Probe {
  int a = 0;
  int b = -1;
  double operator()(const Eigen::VectorXd& x) const {
    return b < 0 ? x[a] : x[a] * x[b];
  }
};

/// Linear, square and pair-product probes on up to `sites` free sites spread
/// across the carrier with distinct variances where possible.
std::vector<Probe> default_probes(const GibbsModel& model, int sites = 4);

enum class BalanceDynamics { harness, shift };

struct BalanceOptions {
  BalanceDynamics dynamics = BalanceDynamics::harness;
  /// Initial law override (lower factor of its covariance). Default: the model.
  std::optional<Eigen::MatrixXd> initial_factor;
};

struct BalanceResult {
  double statistic = 0.0;  // max studentised asymmetry
  int worst_f = -1;
  int worst_g = -1;
  double worst_mean = 0.0;
  bool non_gaussian_noise = false;
  int replicas = 0;
};

/// Max over probe pairs of |mean(f(x0) g(xu) - g(x0) f(xu))| / stderr, with x0
/// drawn from the model (or the override) and xu the engine state after time u.
BalanceResult detailed_balance_statistic(const GibbsModel& model, const Kernel& k,
                                         const Region& region, double u, int replicas,
                                         std::uint64_t seed, std::span<const Probe> probes,
                                         const BalanceOptions& options = {});

struct NestedSample {
  /// values[m][a]: coupled field on box m at anchor a.
  std::vector<std::vector<double>> values;
  /// sum_n b^m_n(i, j)^2 per box and anchor: the conditional variance given the times.
  std::vector<std::vector<double>> conditional_variance;
  /// max |sum_{l<=m} (a^l)^2 - (b^m)^2| over boxes, anchors and epochs.
  double telescoping_error = 0.0;
};

/// Nested-box coupling: one stream of epoch times on the largest box, exact
/// weights b^m per box, increments a^m = sqrt(b^m^2 - b^{m-1}^2) and fields
/// sum_n sum_{l<=m} a^l Z^l. Boxes must be nested, innermost first.
NestedSample coupled_nested_fields(const Kernel& k, std::span<const Region> boxes,
                                   TimeWindow window, std::span<const Site> anchors,
                                   std::uint64_t seed);

}  // namespace harness
