#include "harness/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "harness/error.hpp"

namespace harness {

namespace {

void check_common(const EventStream& events, const Lattice& lattice, const HeightField& zeta,
                  std::span<const double> sample_times) {
  const Region& region = lattice.region();
  if (!events.matches(region)) throw Error(ErrorKind::StreamMismatch, "stream generated on another carrier");
  if (zeta.size() != region.size()) {
    throw Error(ErrorKind::InitialMismatch, "initial field has " + std::to_string(zeta.size()) +
                                                " values, carrier has " + std::to_string(region.size()));
  }
  for (double v : zeta.values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InitialMismatch, "non-finite initial height");
  }
  double prev = events.window.start;
  for (double t : sample_times) {
    if (!events.window.contains(t) || t < prev) {
      throw Error(ErrorKind::InvalidWindow, "sample times must be nondecreasing inside the window");
    }
    prev = t;
  }
}

}  // namespace

void advance(const EventStream& events, const Lattice& lattice, std::span<double> values,
             Dynamics variant, double until) {
  const double sigma = variant == Dynamics::standard ? lattice.kernel().sigma : 0.0;
  for (const Event& e : events.events) {
    if (e.time > until) break;
    if (lattice.is_pinned(e.site)) continue;
    values[static_cast<std::size_t>(e.site)] = lattice.average(e.site, values) + sigma * e.eps;
  }
}

Trajectory evolve(const EventStream& events, const Lattice& lattice, const HeightField& zeta,
                  Dynamics variant, std::span<const double> sample_times) {
  check_common(events, lattice, zeta, sample_times);
  const Region& region = lattice.region();
  if (region.boundary() == BoundaryMode::free && region.pinned_indices().empty()) {
    throw Error(ErrorKind::InvalidRegion, "free boundary dynamics needs a pinned site");
  }
  for (int p : region.pinned_indices()) {
    if (zeta[static_cast<std::size_t>(p)] != 0.0) {
      throw Error(ErrorKind::InitialMismatch, "pinned sites must start at 0");
    }
  }
  lattice.require_updatable();

  const double sigma = variant == Dynamics::standard ? lattice.kernel().sigma : 0.0;
  Trajectory out;
  std::vector<double> h = zeta.values;
  std::size_t next_sample = 0;
  auto take_samples = [&](double upto) {
    while (next_sample < sample_times.size() && sample_times[next_sample] < upto) {
      out.snapshots.push_back({sample_times[next_sample], HeightField{h}});
      ++next_sample;
    }
  };
  for (const Event& e : events.events) {
    take_samples(e.time);
    if (lattice.is_pinned(e.site)) continue;
    h[static_cast<std::size_t>(e.site)] = lattice.average(e.site, h) + sigma * e.eps;
  }
  take_samples(std::numeric_limits<double>::infinity());
  out.final = HeightField{std::move(h)};
  return out;
}

Trajectory evolve(const EventStream& events, const Kernel& k, const Region& region,
                  const HeightField& zeta, Dynamics variant, std::span<const double> sample_times) {
  return evolve(events, Lattice(k, region), zeta, variant, sample_times);
}

Trajectory evolve_seen_from_origin(const EventStream& events, const Lattice& lattice,
                                   const HeightField& zeta, std::span<const double> sample_times) {
  check_common(events, lattice, zeta, sample_times);
  const Region& region = lattice.region();
  const auto origin_idx = region.index_of(Site{});
  if (!origin_idx) throw Error(ErrorKind::OriginOutsideCarrier, "origin is not a carrier site");
  const int origin = *origin_idx;
  for (int p : region.pinned_indices()) {
    if (p != origin) throw Error(ErrorKind::InvalidRegion, "only the origin may be pinned in the relative frame");
  }
  if (zeta[static_cast<std::size_t>(origin)] != 0.0) {
    throw Error(ErrorKind::InitialMismatch, "relative frame starts with height 0 at the origin");
  }
  lattice.require_updatable();
  if (!lattice.row_valid(origin)) {
    throw Error(ErrorKind::MissingBoundary, "origin cannot be averaged");
  }

  const double sigma = lattice.kernel().sigma;
  const auto ext = lattice.exterior_values();
  Trajectory out;
  std::vector<double> h = zeta.values;
  double shift = 0.0;  // absolute height of the origin
  auto relative_average = [&](int site) {
    double acc = 0.0;
    for (const Link& l : lattice.links(site)) {
      acc += l.p * (l.target >= 0 ? h[static_cast<std::size_t>(l.target)]
                                  : ext[static_cast<std::size_t>(~l.target)] - shift);
    }
    return acc;
  };
  std::size_t next_sample = 0;
  auto take_samples = [&](double upto) {
    while (next_sample < sample_times.size() && sample_times[next_sample] < upto) {
      out.snapshots.push_back({sample_times[next_sample], HeightField{h}});
      ++next_sample;
    }
  };
  for (const Event& e : events.events) {
    take_samples(e.time);
    if (e.site == origin) {
      const double jump = relative_average(origin) + sigma * e.eps;
      for (std::size_t j = 0; j < h.size(); ++j) h[j] -= jump;
      h[static_cast<std::size_t>(origin)] = 0.0;
      shift += jump;
    } else {
      h[static_cast<std::size_t>(e.site)] = relative_average(e.site) + sigma * e.eps;
    }
  }
  take_samples(std::numeric_limits<double>::infinity());
  out.final = HeightField{std::move(h)};
  return out;
}

Trajectory evolve_seen_from_origin(const EventStream& events, const Kernel& k,
                                   const Region& region, const HeightField& zeta,
                                   std::span<const double> sample_times) {
  return evolve_seen_from_origin(events, Lattice(k, region), zeta, sample_times);
}

}  // namespace harness
