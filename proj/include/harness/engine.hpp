#pragma once

#include <span>
#include <vector>

#include "harness/events.hpp"
#include "harness/lattice.hpp"

namespace harness {

enum class Dynamics { standard, no_noise };

struct Snapshot {
  double time = 0.0;
  HeightField field;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  HeightField final;
};

/// Pathwise harness update: at an epoch of a non-pinned site i,
/// h(i) <- (P h)(i) + sigma * eps. Jump marks are not consumed.
Trajectory evolve(const EventStream& events, const Lattice& lattice, const HeightField& zeta,
                  Dynamics variant = Dynamics::standard,
                  std::span<const double> sample_times = {});

Trajectory evolve(const EventStream& events, const Kernel& k, const Region& region,
                  const HeightField& zeta, Dynamics variant = Dynamics::standard,
                  std::span<const double> sample_times = {});

/// Heights relative to the origin. An origin epoch shifts every other site by
/// -(P h)(0) - sigma * eps; the origin stays at 0. With fixed boundaries the
/// exterior heights are read in the moving frame.
Trajectory evolve_seen_from_origin(const EventStream& events, const Lattice& lattice,
                                   const HeightField& zeta,
                                   std::span<const double> sample_times = {});

Trajectory evolve_seen_from_origin(const EventStream& events, const Kernel& k,
                                   const Region& region, const HeightField& zeta,
                                   std::span<const double> sample_times = {});

/// Hot path for replica loops: runs all events with time <= until on `values`.
void advance(const EventStream& events, const Lattice& lattice, std::span<double> values,
             Dynamics variant, double until);

}  // namespace harness
