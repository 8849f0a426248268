#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "harness/lattice.hpp"

namespace harness {

using RateTable = std::vector<std::pair<Site, double>>;

/// Difference walk of two coupled backward walks. Away from 0 it jumps by o at
/// rate p(0,o) + p(0,-o); at 0 it fires at rate 1 with law sum_k p(0,k)p(0,k+j).
struct DWalkLaw {
  Kernel base;
  RateTable off_site;   // includes the zero offset when the kernel has self-mass
  RateTable at_origin;  // probability law, zero offset included
  double off_site_exit = 0.0;  // total rate of non-trivial moves
  double origin_exit = 0.0;
  int reach = 0;  // largest max-norm among moves of either regime
};

DWalkLaw make_dwalk_law(const Kernel& k);

/// Rate table for the regime of `state`.
const RateTable& d_jump_distribution(const DWalkLaw& law, const Site& state);

struct McBackend {
  int replicas = 10000;
  std::uint64_t seed = 1;
};

/// radius 0 picks one from the diffusivity and doubles it until the leakage fits.
struct UniformizationBackend {
  int radius = 0;
  double tol = 1e-9;
};

using DWalkBackend = std::variant<McBackend, UniformizationBackend>;

/// A D-walk quantity with its error: stderr for Monte Carlo, a certified bound
/// for uniformization.
struct DWalkValue {
  double value = 0.0;
  double stderr_ = 0.0;
  double error_bound = 0.0;
  std::size_t samples = 0;
  int radius = 0;
};

/// Transient law of one start state on a truncated box with an absorbing
/// "lost" state. Holds the uniformized chain's occupancy of 0 after k steps, so
/// probabilities and integrals at any u <= horizon are Poisson mixtures.
class UniformizedOccupancy {
 public:
  UniformizedOccupancy(const DWalkLaw& law, const Site& start, double horizon,
                       UniformizationBackend options = {});

  DWalkValue probability(double u) const;
  /// Integral of P(D_u = 0) over [0, b], exact up to the truncation bound.
  DWalkValue integral(double b) const;

  double rate() const { return rate_; }
  int radius() const { return radius_; }
  double lost_mass() const { return lost_.empty() ? 0.0 : lost_.back(); }

 private:
  void run(const DWalkLaw& law, const Site& start);
  double tail_bound(double lambda) const;

  double horizon_;
  double rate_ = 0.0;
  int radius_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> at_zero_;
  std::vector<double> lost_;
};

/// Monte Carlo chains from `start`. For every replica, cumulative time spent at 0
/// up to each grid point, and whether the chain sits at 0 at that grid point.
struct OccupationSamples {
  std::vector<double> grid;
  std::vector<std::vector<double>> occupation;  // [replica][grid]
  std::vector<std::vector<std::uint8_t>> at_zero;
};

OccupationSamples simulate_occupation(const DWalkLaw& law, const Site& start,
                                      std::span<const double> grid, int replicas,
                                      std::uint64_t seed);

/// P(D^i_u = 0).
DWalkValue occupancy_probability(const DWalkLaw& law, const Site& i, double u,
                                 const DWalkBackend& backend);

/// Integral of P(D^0_u = 0) over [0, tau].
DWalkValue window_variance(const DWalkLaw& law, double tau, const DWalkBackend& backend);

/// 2 * integral over [0, tau] of P(D^0_u = 0) - P(D^i_u = 0).
DWalkValue difference_variance(const DWalkLaw& law, const Site& i, double tau,
                               const DWalkBackend& backend);

/// Integral of P(D^0_u = 0) over [s, s_max].
DWalkValue residual_tail(const DWalkLaw& law, double s, double s_max,
                         const DWalkBackend& backend);

/// 2 * integral over [s, s_max] of P(D^0_u = 0) - P(D^i_u = 0).
DWalkValue difference_residual_tail(const DWalkLaw& law, const Site& i, double s, double s_max,
                                    const DWalkBackend& backend);

/// Residual tails for a whole grid of s, sharing one chain ensemble or one
/// uniformized run.
std::vector<DWalkValue> residual_tail_profile(const DWalkLaw& law, std::span<const double> s_grid,
                                              double s_max, const DWalkBackend& backend);
std::vector<DWalkValue> difference_residual_profile(const DWalkLaw& law, const Site& i,
                                                    std::span<const double> s_grid, double s_max,
                                                    const DWalkBackend& backend);

/// CSV rows: u, P(D^0_u=0), P(D^i_u=0), ci (99% half-width or certified bound).
void write_occupancy_grid(std::ostream& out, const DWalkLaw& law, const Site& i,
                          std::span<const double> us, const DWalkBackend& backend);

}  // namespace harness
