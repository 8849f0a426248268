#include <doctest.h>

#include <cmath>

#include "harness/dual.hpp"
#include "harness/engine.hpp"
#include "harness/error.hpp"
#include "harness/rng.hpp"
#include "harness/stats.hpp"

using namespace harness;

namespace {

EventStream manual_stream(const Region& r, TimeWindow w, std::vector<Event> events) {
  EventStream s;
  s.window = w;
  s.region_fingerprint = r.fingerprint();
  s.carrier_size = r.size();
  s.events = std::move(events);
  return s;
}

}  // namespace

TEST_CASE("backward weights on trivial streams") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, -2, 2);
  const Lattice lat(k, r);
  const int i = *r.index_of(make_site({2}));
  const DualWeights empty = backward_weights(manual_stream(r, {0, 1}, {}), lat, i, 1.0, 0.0);
  CHECK(empty.epochs.empty());
  CHECK(empty.terminal_interior[static_cast<std::size_t>(i)] == 1.0);
  CHECK(empty.interior_mass() == 1.0);

  const EventStream one = manual_stream(r, {0, 1}, {{0.5, -0.4, i, 0}});
  const DualWeights w = backward_weights(one, lat, i, 1.0, 0.0);
  REQUIRE(w.epochs.size() == 1);
  CHECK(w.epochs[0].weight == 1.0);
  CHECK(w.terminal_interior[static_cast<std::size_t>(i - 1)] == 0.5);
  CHECK(w.absorbed_mass() == 0.5);

  // one event at the anchor: sigma * eps + p-average of zeta/gamma
  Region g = r;
  g.fill_gamma(k, [](const Site&) { return 3.0; });
  const Lattice lg(k, g);
  HeightField zeta = flat_field(g, 1.0);
  CHECK(dual_height(backward_weights(one, lg, i, 1.0, 0.0), one, lg, zeta) == doctest::Approx(-0.4 + 0.5 * 1.0 + 0.5 * 3.0));
  CHECK(dual_height(empty, manual_stream(r, {0, 1}, {}), lat, flat_field(r)) == 0.0);
  CHECK(representation_residual(manual_stream(r, {0, 1}, {}), k, r, flat_field(r), make_site({0}), 0.0, 1.0) == 0.0);
}

TEST_CASE("backward weights: errors") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, -2, 2);
  const EventStream ev = generate_events(k, r, {0, 2}, 1);
  CHECK_THROWS_AS(backward_weights(ev, k, r, make_site({5}), 2.0, 0.0), Error);
  CHECK_THROWS_AS(backward_weights(ev, k, r, make_site({0}), 3.0, 0.0), Error);
  CHECK_THROWS_AS(backward_weights(ev, k, r, make_site({0}), 1.0, 1.5), Error);
  const DualWeights w = backward_weights(ev, k, r, make_site({0}), 2.0, 0.0);
  const EventStream other = generate_events(k, r, {0, 2}, 2);
  CHECK_THROWS_AS(dual_height(w, other, Lattice(k, r), flat_field(r)), Error);
}

TEST_CASE("mass is conserved and weights stay in [0,1]") {
  const Kernel k = Kernel::from_weights(2, {{make_site({1, 0}), 0.3}, {make_site({-1, 0}), 0.2}, {make_site({0, 2}), 0.25},
                                            {make_site({0, -1}), 0.15}, {make_site({0, 0}), 0.1}});
  const Region r = Region::cube(2, -3, 3).with_pinned({make_site({1, 1})});
  const EventStream ev = generate_events(k, r, {0, 6}, 5);
  const Lattice lat(k, r);
  for (int a = 0; a < static_cast<int>(r.size()); a += 5) {
    const DualWeights w = backward_weights(ev, lat, a, 6.0, 0.0, {true});
    CHECK(w.max_mass_drift <= 1e-12);
    CHECK(std::abs(w.interior_mass() + w.absorbed_mass() - 1.0) <= 1e-12);
    for (const auto& e : w.epochs) {
      CHECK(e.weight >= 0.0);
      CHECK(e.weight <= 1.0);
      CHECK_FALSE(r.is_pinned(ev.events[static_cast<std::size_t>(e.event)].site));
    }
  }
}

TEST_CASE("forward and dual agree pathwise") {
  for (int d = 1; d <= 3; ++d) {
    for (NoiseLaw law : {NoiseLaw::gaussian, NoiseLaw::uniform, NoiseLaw::rademacher}) {
      const Kernel k = Kernel::nearest_neighbor(d, law, 0.7);
      for (bool pin : {false, true}) {
        Region r = Region::cube(d, -2, 2);
        if (pin) r = r.with_pinned({Site{}});
        r.fill_gamma(k, [](const Site& s) { return 0.1 * s[0] - 0.2; });
        HeightField zeta = field_from(r, [](const Site& s) { return CounterRng(site_key(3, s)).uniform(); });
        for (int p : r.pinned_indices()) zeta[static_cast<std::size_t>(p)] = 0.0;
        const EventStream ev = generate_events(k, r, {0.0, 5.0}, 40 + d);
        for (const Site& s : r.sites()) {
          CHECK(representation_residual(ev, k, r, zeta, s, 0.0, 5.0) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("flat dual profile matches dual heights on nested windows") {
  const Kernel k = Kernel::nearest_neighbor(2);
  const Region r = Region::cube(2, -3, 3);
  const Lattice lat(k, r);
  const EventStream ev = generate_events(k, r, {-8.0, 0.0}, 12);
  const double lags[] = {0.0, 1.0, 3.0, 8.0};
  const int a = *r.index_of(Site{});
  const auto prof = flat_dual_profile(ev, lat, a, 0.0, lags);
  CHECK(prof[0] == 0.0);
  for (std::size_t m = 1; m < 4; ++m) {
    const DualWeights w = backward_weights(ev, lat, a, 0.0, -lags[m]);
    CHECK(std::abs(prof[m] - dual_height(w, ev, lat, flat_field(r))) <= 1e-12);
  }
  // also equals the forward run started flat at t - lag
  EventStream cut = ev;
  cut.window.start = -3.0;
  std::erase_if(cut.events, [](const Event& e) { return e.time <= -3.0; });
  CHECK(std::abs(evolve(cut, lat, flat_field(r)).final[static_cast<std::size_t>(a)] - prof[2]) <= 1e-12);
}

TEST_CASE("weights grow with the box on a shared stream") {
  const Kernel k = Kernel::nearest_neighbor(2);
  const Region big = Region::cube(2, -4, 4);
  const Region small = Region::cube(2, -2, 2);
  const EventStream ev = generate_events(k, big, {0, 10}, 77);
  const EventStream sub = restrict_stream(ev, big, small);
  std::vector<double> wb(ev.events.size(), 0.0);
  scan_epoch_weights(ev, Lattice(k, big), *big.index_of(Site{}), 10.0, 0.0,
                     [&](std::int32_t id, double w) { wb[static_cast<std::size_t>(id)] = w; });
  int violations = 0;
  scan_epoch_weights(sub, Lattice(k, small), *small.index_of(Site{}), 10.0, 0.0, [&](std::int32_t id, double w) {
    violations += w > wb[static_cast<std::size_t>(sub.source_ids[static_cast<std::size_t>(id)])] + 1e-15;
  });
  CHECK(violations == 0);
}

TEST_CASE("martingale increments") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, -5, 5);
  const double zero[] = {0.0};
  const MartingaleTable t0 = martingale_increments(k, r, Site{}, 0.0, zero, 5, 1);
  for (const auto& v : t0.values) CHECK(v[0] == 0.0);
  const double grid[] = {0.0, 1.0, 2.0, 4.0};
  const MartingaleTable t = martingale_increments(k, r, Site{}, 0.0, grid, 4000, 3);
  for (std::size_t m = 0; m < 3; ++m) {
    std::vector<double> inc;
    for (const auto& row : t.increments) inc.push_back(row[m]);
    CHECK(estimate(inc).z(0.0) < 4.0);
  }
}

TEST_CASE("cross-covariance equals the expected weight overlap") {
  // E[eta^A(i) eta^B(j)] = E[sum_n b^A_n(i, .) b^B_n(j, .)] on shared streams
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region big = Region::cube(1, -6, 6);
  const Region small = Region::cube(1, -3, 3);
  const Lattice lb(k, big), ls(k, small);
  std::vector<double> prod, overlap;
  for (int r = 0; r < 6000; ++r) {
    const EventStream ev = generate_events(k, big, {0, 6}, derive_key(5, r));
    const EventStream sub = restrict_stream(ev, big, small);
    const DualWeights wa = backward_weights(ev, lb, *big.index_of(Site{}), 6.0, 0.0);
    const DualWeights wb = backward_weights(sub, ls, *small.index_of(make_site({1})), 6.0, 0.0);
    prod.push_back(dual_height(wa, ev, lb, flat_field(big)) * dual_height(wb, sub, ls, flat_field(small)));
    std::vector<double> a(ev.events.size(), 0.0);
    for (const auto& e : wa.epochs) a[static_cast<std::size_t>(e.event)] = e.weight;
    double o = 0.0;
    for (const auto& e : wb.epochs) o += e.weight * a[static_cast<std::size_t>(sub.source_ids[static_cast<std::size_t>(e.event)])];
    overlap.push_back(o);
  }
  const Estimate ep = estimate(prod), eo = estimate(overlap);
  CHECK(std::abs(ep.mean - eo.mean) <= 3.0 * std::hypot(ep.stderr_, eo.stderr_));
}
