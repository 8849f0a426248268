#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "harness/events.hpp"
#include "harness/lattice.hpp"

namespace harness {

struct EpochWeight {
  std::int32_t event = 0;
  double weight = 0.0;
};

/// Exact conditional occupation law of the backward walk started at `anchor`
/// at time t and run down to time s, given the epoch times only.
struct DualWeights {
  int anchor = 0;
  double t = 0.0;
  double s = 0.0;
  /// One entry per epoch in (s, t] at a non-pinned carrier site, in scan
  /// (decreasing time) order.
  std::vector<EpochWeight> epochs;
  /// Mass still inside the free carrier at time s (dense over carrier).
  std::vector<double> terminal_interior;
  /// Mass frozen on exterior shell sites (dense over Lattice::exterior_sites()).
  std::vector<double> absorbed_exterior;
  /// Mass frozen on pinned carrier sites (dense over carrier).
  std::vector<double> absorbed_pinned;
  /// Largest |total mass - 1| seen after any scan step (audited scans only).
  double max_mass_drift = 0.0;

  std::uint64_t stream_seed = 0;
  std::size_t stream_size = 0;

  double interior_mass() const;
  double absorbed_mass() const;
};

struct ScanOptions {
  /// Recompute the total mass after every epoch.
  bool audit = false;
};

DualWeights backward_weights(const EventStream& events, const Lattice& lattice, int anchor,
                             double t, double s, ScanOptions options = {});

DualWeights backward_weights(const EventStream& events, const Kernel& k, const Region& region,
                             const Site& anchor, double t, double s, ScanOptions options = {});

/// Noise sum along the dual plus the terminal masses applied to zeta (interior)
/// and gamma (exterior); pinned sites contribute 0.
double dual_height(const DualWeights& weights, const EventStream& events, const Lattice& lattice,
                   const HeightField& zeta);

/// |forward height at (i, t) - dual height|. The stream must start at s.
double representation_residual(const EventStream& events, const Lattice& lattice,
                               const HeightField& zeta, int anchor, double s, double t);

double representation_residual(const EventStream& events, const Kernel& k, const Region& region,
                               const HeightField& zeta, const Site& anchor, double s, double t);

/// Flat-start dual heights of one anchor on nested windows [t - lag, t] for
/// each lag (nondecreasing), from a single backward scan.
std::vector<double> flat_dual_profile(const EventStream& events, const Lattice& lattice,
                                      int anchor, double t, std::span<const double> lags);

/// Backward scan that reports every epoch weight through a callback and
/// returns nothing else; the common engine of the functions above.
void scan_epoch_weights(const EventStream& events, const Lattice& lattice, int anchor, double t,
                        double s, const std::function<void(std::int32_t, double)>& on_epoch);

struct MartingaleTable {
  std::vector<double> lags;
  /// values[r][m] = flat-start height on [t - lags[m], t] for replica r.
  std::vector<std::vector<double>> values;
  /// increments[r][m] = values[r][m + 1] - values[r][m].
  std::vector<std::vector<double>> increments;
};

/// One stream per replica on the largest window; nested windows share it.
MartingaleTable martingale_increments(const Kernel& k, const Region& region, const Site& anchor,
                                      double t, std::span<const double> lags, int replicas,
                                      std::uint64_t seed);

}  // namespace harness
