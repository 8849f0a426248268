#include "harness/dual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "harness/engine.hpp"
#include "harness/error.hpp"
#include "harness/parallel.hpp"
#include "harness/rng.hpp"

namespace harness {

namespace {

void check_anchor(const EventStream& events, const Lattice& lattice, int anchor, double t, double s) {
  if (!events.matches(lattice.region())) {
    throw Error(ErrorKind::StreamMismatch, "stream generated on another carrier");
  }
  if (anchor < 0 || static_cast<std::size_t>(anchor) >= lattice.size()) {
    throw Error(ErrorKind::AnchorOutsideCarrier, "anchor index out of range");
  }
  if (!(s <= t) || s < events.window.start || t > events.window.end) {
    throw Error(ErrorKind::WindowMismatch, "need window.start <= s <= t <= window.end");
  }
}

// Walks the epochs in (s, t] backwards; `on_epoch` sees (event id, weight)
// before that epoch's mass is redistributed.
template <class OnEpoch, class OnAbsorb>
std::vector<double> run_scan(const EventStream& events, const Lattice& lattice, int anchor,
                             double t, double s, OnEpoch&& on_epoch, OnAbsorb&& on_absorb) {
  std::vector<double> mass(lattice.size(), 0.0);
  if (lattice.is_pinned(anchor)) {
    on_absorb(anchor, 1.0);
  } else {
    mass[static_cast<std::size_t>(anchor)] = 1.0;
  }
  const auto& ev = events.events;
  auto it = std::upper_bound(ev.begin(), ev.end(), t,
                             [](double value, const Event& e) { return value < e.time; });
  while (it != ev.begin()) {
    --it;
    const Event& e = *it;
    if (e.time <= s) break;
    if (lattice.is_pinned(e.site)) continue;
    const auto site = static_cast<std::size_t>(e.site);
    const double w = mass[site];
    on_epoch(static_cast<std::int32_t>(it - ev.begin()), w);
    if (w == 0.0) continue;
    mass[site] = 0.0;
    for (const Link& l : lattice.links(e.site)) {
      const double moved = w * l.p;
      if (l.target >= 0 && !lattice.is_pinned(l.target)) {
        mass[static_cast<std::size_t>(l.target)] += moved;
      } else {
        on_absorb(l.target, moved);
      }
    }
  }
  return mass;
}

}  // namespace

double DualWeights::interior_mass() const {
  return std::accumulate(terminal_interior.begin(), terminal_interior.end(), 0.0);
}

double DualWeights::absorbed_mass() const {
  return std::accumulate(absorbed_exterior.begin(), absorbed_exterior.end(), 0.0) +
         std::accumulate(absorbed_pinned.begin(), absorbed_pinned.end(), 0.0);
}

void scan_epoch_weights(const EventStream& events, const Lattice& lattice, int anchor, double t,
                        double s, const std::function<void(std::int32_t, double)>& on_epoch) {
  check_anchor(events, lattice, anchor, t, s);
  lattice.require_updatable();
  run_scan(events, lattice, anchor, t, s, on_epoch, [](int, double) {});
}

DualWeights backward_weights(const EventStream& events, const Lattice& lattice, int anchor,
                             double t, double s, ScanOptions options) {
  check_anchor(events, lattice, anchor, t, s);
  lattice.require_updatable();
  DualWeights out;
  out.anchor = anchor;
  out.t = t;
  out.s = s;
  out.stream_seed = events.seed;
  out.stream_size = events.events.size();
  out.absorbed_exterior.assign(lattice.exterior_sites().size(), 0.0);
  out.absorbed_pinned.assign(lattice.size(), 0.0);

  auto absorb = [&](int target, double m) {
    if (target >= 0) {
      out.absorbed_pinned[static_cast<std::size_t>(target)] += m;
    } else {
      out.absorbed_exterior[static_cast<std::size_t>(~target)] += m;
    }
  };
  if (!options.audit) {
    out.terminal_interior = run_scan(
        events, lattice, anchor, t, s,
        [&](std::int32_t id, double w) { out.epochs.push_back({id, w}); }, absorb);
    return out;
  }
  // Audited scan: same recursion, total mass checked after every epoch.
  std::vector<double> mass(lattice.size(), 0.0);
  if (lattice.is_pinned(anchor)) {
    absorb(anchor, 1.0);
  } else {
    mass[static_cast<std::size_t>(anchor)] = 1.0;
  }
  auto total = [&] {
    return std::accumulate(mass.begin(), mass.end(), 0.0) + out.absorbed_mass();
  };
  const auto& ev = events.events;
  for (auto it = ev.rbegin(); it != ev.rend(); ++it) {
    if (it->time > t) continue;
    if (it->time <= s) break;
    if (lattice.is_pinned(it->site)) continue;
    const double w = mass[static_cast<std::size_t>(it->site)];
    out.epochs.push_back({static_cast<std::int32_t>(ev.rend() - it - 1), w});
    mass[static_cast<std::size_t>(it->site)] = 0.0;
    for (const Link& l : lattice.links(it->site)) {
      if (l.target >= 0 && !lattice.is_pinned(l.target)) {
        mass[static_cast<std::size_t>(l.target)] += w * l.p;
      } else {
        absorb(l.target, w * l.p);
      }
    }
    out.max_mass_drift = std::max(out.max_mass_drift, std::abs(total() - 1.0));
  }
  out.terminal_interior = std::move(mass);
  return out;
}

DualWeights backward_weights(const EventStream& events, const Kernel& k, const Region& region,
                             const Site& anchor, double t, double s, ScanOptions options) {
  auto idx = region.index_of(anchor);
  if (!idx) throw Error(ErrorKind::AnchorOutsideCarrier, "anchor outside carrier");
  return backward_weights(events, Lattice(k, region), *idx, t, s, options);
}

double dual_height(const DualWeights& weights, const EventStream& events, const Lattice& lattice,
                   const HeightField& zeta) {
  if (weights.stream_seed != events.seed || weights.stream_size != events.events.size() ||
      !events.matches(lattice.region()) ||
      weights.terminal_interior.size() != lattice.size() ||
      weights.absorbed_exterior.size() != lattice.exterior_sites().size()) {
    throw Error(ErrorKind::StreamMismatch, "weights were computed on a different stream or region");
  }
  if (zeta.size() != lattice.size()) throw Error(ErrorKind::InitialMismatch, "field size differs from carrier");
  const double sigma = lattice.kernel().sigma;
  double noise = 0.0;
  for (const EpochWeight& ew : weights.epochs) {
    noise += ew.weight * events.events[static_cast<std::size_t>(ew.event)].eps;
  }
  double initial = 0.0;
  for (std::size_t j = 0; j < zeta.size(); ++j) initial += weights.terminal_interior[j] * zeta[j];
  double boundary = 0.0;
  const auto gamma = lattice.exterior_values();
  for (std::size_t e = 0; e < weights.absorbed_exterior.size(); ++e) {
    const double m = weights.absorbed_exterior[e];
    if (m == 0.0) continue;
    if (std::isnan(gamma[e])) throw Error(ErrorKind::MissingBoundary, "absorbed mass on an uncovered exterior site");
    boundary += m * gamma[e];
  }
  return sigma * noise + initial + boundary;
}

double representation_residual(const EventStream& events, const Lattice& lattice,
                               const HeightField& zeta, int anchor, double s, double t) {
  if (s != events.window.start) {
    throw Error(ErrorKind::WindowMismatch, "the forward run starts at the stream window start");
  }
  const double times[] = {t};
  const Trajectory traj = evolve(events, lattice, zeta, Dynamics::standard, times);
  const double forward = traj.snapshots.front().field[static_cast<std::size_t>(anchor)];
  const DualWeights w = backward_weights(events, lattice, anchor, t, s);
  return std::abs(forward - dual_height(w, events, lattice, zeta));
}

double representation_residual(const EventStream& events, const Kernel& k, const Region& region,
                               const HeightField& zeta, const Site& anchor, double s, double t) {
  auto idx = region.index_of(anchor);
  if (!idx) throw Error(ErrorKind::AnchorOutsideCarrier, "anchor outside carrier");
  return representation_residual(events, Lattice(k, region), zeta, *idx, s, t);
}

std::vector<double> flat_dual_profile(const EventStream& events, const Lattice& lattice,
                                      int anchor, double t, std::span<const double> lags) {
  if (lags.empty()) return {};
  if (!std::is_sorted(lags.begin(), lags.end()) || lags.front() < 0.0) {
    throw Error(ErrorKind::WindowMismatch, "lags must be nondecreasing and >= 0");
  }
  const double s = t - lags.back();
  check_anchor(events, lattice, anchor, t, s);
  lattice.require_updatable();
  const double sigma = lattice.kernel().sigma;
  std::vector<double> out(lags.size(), 0.0);
  std::size_t m = 0;
  double acc = 0.0;
  // Lags are consumed in increasing order as the scan moves back in time.
  auto settle = [&](double time) {
    while (m < lags.size() && time <= t - lags[m]) out[m++] = acc;
  };
  run_scan(
      events, lattice, anchor, t, s,
      [&](std::int32_t id, double w) {
        const Event& e = events.events[static_cast<std::size_t>(id)];
        settle(e.time);
        acc += sigma * w * e.eps;
      },
      [](int, double) {});
  while (m < lags.size()) out[m++] = acc;
  return out;
}

MartingaleTable martingale_increments(const Kernel& k, const Region& region, const Site& anchor,
                                      double t, std::span<const double> lags, int replicas,
                                      std::uint64_t seed) {
  if (!std::is_sorted(lags.begin(), lags.end()) || lags.empty() || lags.front() < 0.0) {
    throw Error(ErrorKind::WindowMismatch, "lag grid must be nondecreasing and >= 0");
  }
  auto idx = region.index_of(anchor);
  if (!idx) throw Error(ErrorKind::AnchorOutsideCarrier, "anchor outside carrier");
  const Lattice lattice(k, region);
  const TimeWindow window{t - lags.back(), t};
  MartingaleTable table;
  table.lags.assign(lags.begin(), lags.end());
  table.values = map_replicas(replicas, [&](int r) {
    const EventStream events = generate_events(k, region, window, derive_key(seed, static_cast<std::uint64_t>(r)));
    return flat_dual_profile(events, lattice, *idx, t, lags);
  });
  table.increments.reserve(table.values.size());
  for (const auto& v : table.values) {
    std::vector<double> inc;
    for (std::size_t m = 0; m + 1 < v.size(); ++m) inc.push_back(v[m + 1] - v[m]);
    table.increments.push_back(std::move(inc));
  }
  return table;
}

}  // namespace harness
