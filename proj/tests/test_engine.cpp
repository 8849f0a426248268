#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <cmath>

#include "harness/engine.hpp"
#include "harness/error.hpp"
#include "harness/events.hpp"
#include "harness/rng.hpp"

using namespace harness;

namespace {

EventStream manual_stream(const Region& r, TimeWindow w, std::vector<Event> events) {
  EventStream s;
  s.window = w;
  s.seed = 99;
  s.region_fingerprint = r.fingerprint();
  s.carrier_size = r.size();
  s.events = std::move(events);
  return s;
}

HeightField noisy(const Region& r, std::uint64_t key) {
  return field_from(r, [&](const Site& s) { return CounterRng(site_key(key, s)).uniform() * 4.0 - 2.0; });
}

}  // namespace

TEST_CASE("empty window has no events") {
  const Region r = Region::cube(2, -3, 3);
  CHECK(generate_events(Kernel::nearest_neighbor(2), r, {1.0, 1.0}, 5).events.empty());
  CHECK_THROWS_AS(generate_events(Kernel::nearest_neighbor(2), r, {1.0, 0.5}, 5), Error);
}

TEST_CASE("streams are sorted, inside the window and reproducible") {
  const Kernel k = Kernel::nearest_neighbor(2);
  const Region r = Region::cube(2, -4, 4);
  const EventStream a = generate_events(k, r, {-2.0, 3.0}, 17);
  const EventStream b = generate_events(k, r, {-2.0, 3.0}, 17);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t n = 0; n < a.events.size(); ++n) {
    CHECK(a.events[n].time == b.events[n].time);
    CHECK(a.events[n].eps == b.events[n].eps);
    CHECK(a.events[n].jump == b.events[n].jump);
    CHECK(a.window.contains(a.events[n].time));
    if (n > 0) CHECK(a.events[n].time > a.events[n - 1].time);
  }
  CHECK(generate_events(k, r, {-2.0, 3.0}, 18).events.front().time != a.events.front().time);
}

TEST_CASE("per-site counts are Poisson(10)") {
  const Kernel k = Kernel::nearest_neighbor(2);
  const Region r = Region::cube(2, 0, 9);  // 100 sites
  const int seeds = 1000;
  const int lo = 3, hi = 18;  // bins: <=lo, lo+1..hi-1, >=hi
  std::vector<double> observed(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (int s = 0; s < seeds; ++s) {
    std::vector<int> counts(r.size(), 0);
    for (const Event& e : generate_events(k, r, {0.0, 10.0}, 1000 + s).events) ++counts[static_cast<std::size_t>(e.site)];
    for (int c : counts) observed[static_cast<std::size_t>(std::clamp(c, lo, hi) - lo)] += 1.0;
  }
  const boost::math::poisson_distribution<> pois(10.0);
  const double n = seeds * 100.0;
  double chi2 = 0.0;
  for (int b = lo; b <= hi; ++b) {
    double p = b == lo ? boost::math::cdf(pois, lo)
               : b == hi ? boost::math::cdf(boost::math::complement(pois, hi - 1))
                         : boost::math::pdf(pois, b);
    const double expected = n * p;
    chi2 += (observed[static_cast<std::size_t>(b - lo)] - expected) * (observed[static_cast<std::size_t>(b - lo)] - expected) / expected;
  }
  const boost::math::chi_squared_distribution<> law(hi - lo);
  CHECK(chi2 < boost::math::quantile(boost::math::complement(law, 1e-3)));
}

TEST_CASE("noise laws are centered with unit variance") {
  const Region r = Region::cube(1, 0, 199);
  for (NoiseLaw law : {NoiseLaw::gaussian, NoiseLaw::uniform, NoiseLaw::rademacher}) {
    const EventStream ev = generate_events(Kernel::nearest_neighbor(1, law), r, {0.0, 100.0}, 3);
    double m = 0.0, v = 0.0;
    for (const Event& e : ev.events) m += e.eps;
    m /= double(ev.events.size());
    for (const Event& e : ev.events) v += (e.eps - m) * (e.eps - m);
    v /= double(ev.events.size() - 1);
    const double n = double(ev.events.size());
    CHECK(std::abs(m) < 4.0 / std::sqrt(n));
    CHECK(std::abs(v - 1.0) < 0.03);
    if (law == NoiseLaw::rademacher) CHECK(std::abs(ev.events.front().eps) == 1.0);
    if (law == NoiseLaw::uniform) {
      for (const Event& e : ev.events) CHECK_MESSAGE(std::abs(e.eps) <= std::sqrt(3.0), "uniform out of range");
    }
  }
}

TEST_CASE("jump marks follow the kernel weights") {
  const Kernel k = Kernel::from_weights(1, {{make_site({1}), 0.7}, {make_site({-1}), 0.2}, {make_site({3}), 0.1}});
  const EventStream ev = generate_events(k, Region::cube(1, 0, 99), {0.0, 200.0}, 8);
  std::vector<double> freq(3, 0.0);
  for (const Event& e : ev.events) freq[static_cast<std::size_t>(e.jump)] += 1.0;
  const double n = double(ev.events.size());
  for (std::size_t j = 0; j < 3; ++j) {
    const double p = k.weights[j].p;
    CHECK(std::abs(freq[j] / n - p) < 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("site substreams do not depend on the carrier") {
  const Kernel k = Kernel::nearest_neighbor(2);
  const Region big = Region::cube(2, -5, 5);
  const Region small = Region::cube(2, -2, 2);
  const EventStream a = generate_events(k, big, {0.0, 4.0}, 11);
  const EventStream b = generate_events(k, small, {0.0, 4.0}, 11);
  const EventStream c = restrict_stream(a, big, small);
  REQUIRE(b.events.size() == c.events.size());
  for (std::size_t n = 0; n < b.events.size(); ++n) {
    CHECK(b.events[n].time == c.events[n].time);
    CHECK(b.events[n].eps == c.events[n].eps);
    CHECK(b.events[n].site == c.events[n].site);
    CHECK(a.events[static_cast<std::size_t>(c.source_ids[n])].time == c.events[n].time);
  }
  CHECK_THROWS_AS(restrict_stream(b, small, big), Error);
}

TEST_CASE("evolve: trivial streams") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, -3, 3);
  const HeightField zeta = noisy(r, 4);
  CHECK(evolve(manual_stream(r, {0.0, 1.0}, {}), k, r, zeta).final.values == zeta.values);

  const int j = *r.index_of(make_site({1}));
  Event e{0.5, 0.7, j, 0};
  const HeightField out = evolve(manual_stream(r, {0.0, 1.0}, {e}), k, r, zeta).final;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (static_cast<int>(i) == j) {
      CHECK(out[i] == doctest::Approx(0.5 * (zeta[i - 1] + zeta[i + 1]) + 0.7));
    } else {
      CHECK(out[i] == zeta[i]);
    }
  }
  // sigma scales the noise; pinned sites ignore their events
  Kernel k2 = k;
  k2.sigma = 2.0;
  CHECK(evolve(manual_stream(r, {0.0, 1.0}, {e}), k2, r, zeta).final[static_cast<std::size_t>(j)] ==
        doctest::Approx(0.5 * (zeta[j - 1] + zeta[j + 1]) + 1.4));
  const Region pinned = r.with_pinned({make_site({1})});
  HeightField z0 = zeta;
  z0[static_cast<std::size_t>(j)] = 0.0;
  CHECK(evolve(manual_stream(pinned, {0.0, 1.0}, {e}), k, pinned, z0).final.values == z0.values);
  CHECK_THROWS_AS(evolve(manual_stream(pinned, {0.0, 1.0}, {e}), k, pinned, zeta), Error);
}

TEST_CASE("evolve: input checks") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, -3, 3);
  const EventStream ev = generate_events(k, r, {0.0, 1.0}, 1);
  CHECK_THROWS_AS(evolve(ev, k, r, HeightField{{1.0, 2.0}}), Error);
  CHECK_THROWS_AS(evolve(ev, k, Region::cube(1, -2, 2), flat_field(Region::cube(1, -2, 2))), Error);
  const Region free = Region::cube(1, -3, 3, BoundaryMode::free);
  CHECK_THROWS_AS(evolve(generate_events(k, free, {0.0, 1.0}, 1), k, free, flat_field(free)), Error);
  const double times[] = {2.0};
  CHECK_THROWS_AS(evolve(ev, k, r, flat_field(r), Dynamics::standard, times), Error);
}

TEST_CASE("snapshots are taken at the requested times") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, -5, 5);
  const EventStream ev = generate_events(k, r, {0.0, 6.0}, 2);
  const double times[] = {1.0, 3.0, 6.0};
  const Trajectory traj = evolve(ev, k, r, noisy(r, 1), Dynamics::standard, times);
  REQUIRE(traj.snapshots.size() == 3);
  CHECK(traj.snapshots[2].field.values == traj.final.values);
  // a snapshot equals a run on the truncated window
  EventStream cut = ev;
  std::erase_if(cut.events, [](const Event& e) { return e.time > 3.0; });
  CHECK(evolve(cut, k, r, noisy(r, 1)).final.values == traj.snapshots[1].field.values);
}

TEST_CASE("no-noise dynamics fix harmonic data and split the standard run") {
  const Kernel k = Kernel::from_weights(2, {{make_site({1, 0}), 0.25}, {make_site({-1, 0}), 0.25},
                                            {make_site({0, 1}), 0.25}, {make_site({0, -1}), 0.25}});
  auto h = [](const Site& s) { return 3.0 * s[0] * s[1] - 2.0 * s[1] + 1.0; };
  Region r = Region::cube(2, -3, 3);
  r.fill_gamma(k, h);
  const EventStream ev = generate_events(k, r, {0.0, 8.0}, 21);
  const HeightField hf = field_from(r, h);
  const HeightField out = evolve(ev, k, r, hf, Dynamics::no_noise).final;
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - hf[i]) <= 1e-12);

  const Region flat = Region::cube(2, -3, 3);
  const HeightField zeta = noisy(r, 5);
  const HeightField full = evolve(ev, k, r, zeta).final;
  const HeightField noise = evolve(ev, k, flat, flat_field(flat)).final;
  const HeightField init = evolve(ev, k, r, zeta, Dynamics::no_noise).final;
  for (std::size_t i = 0; i < full.size(); ++i) CHECK(std::abs(full[i] - noise[i] - init[i]) <= 1e-9);
  const HeightField zero = evolve(ev, k, flat, flat_field(flat), Dynamics::no_noise).final;
  for (double v : zero.values) CHECK(v == 0.0);
}

TEST_CASE("seen from the origin equals evolve minus the origin height") {
  for (BoundaryMode mode : {BoundaryMode::fixed_gamma, BoundaryMode::free}) {
    const Kernel k = Kernel::from_weights(1, {{make_site({1}), 0.5}, {make_site({-1}), 0.3}, {make_site({2}), 0.2}});
    Region r = Region::cube(1, -6, 6, mode);
    if (mode == BoundaryMode::fixed_gamma) r.fill_gamma(k, [](const Site& s) { return 0.3 * s[0]; });
    const EventStream ev = generate_events(k, r, {0.0, 10.0}, 33);
    HeightField zeta = noisy(r, 9);
    zeta[*r.index_of(Site{})] = 0.0;
    const double times[] = {2.5, 10.0};
    const Trajectory rel = evolve_seen_from_origin(ev, k, r, zeta, times);
    for (const auto& snap : rel.snapshots) CHECK(snap.field[*r.index_of(Site{})] == 0.0);
    // Free boundary has no absolute run without a pin, so only the frame check applies there.
    if (mode == BoundaryMode::fixed_gamma) {
      const Trajectory abs = evolve(ev, k, r, zeta, Dynamics::standard, times);
      for (std::size_t n = 0; n < 2; ++n) {
        const double o = abs.snapshots[n].field[*r.index_of(Site{})];
        for (std::size_t i = 0; i < r.size(); ++i) {
          CHECK(std::abs(rel.snapshots[n].field[i] - (abs.snapshots[n].field[i] - o)) <= 1e-9);
        }
      }
    }
  }
  const Region no_origin = Region::cube(1, 1, 4);
  CHECK_THROWS_AS(evolve_seen_from_origin(generate_events(Kernel::nearest_neighbor(1), no_origin, {0, 1}, 1),
                                          Kernel::nearest_neighbor(1), no_origin, flat_field(no_origin)),
                  Error);
  const Region r = Region::cube(1, -3, 3);
  const HeightField z = noisy(r, 2);
  HeightField z0 = z;
  z0[*r.index_of(Site{})] = 0.0;
  CHECK(evolve_seen_from_origin(manual_stream(r, {0, 1}, {}), Kernel::nearest_neighbor(1), r, z0).final.values ==
        z0.values);
}

TEST_CASE("time collisions are resampled") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, 0, 3);
  EventStream s = manual_stream(r, {0.0, 1.0}, {{0.5, 0.1, 0, 0}, {0.5, 0.2, 1, 1}, {0.25, 0.3, 2, 0}});
  resolve_time_collisions(s, r.sites());
  REQUIRE(s.events.size() == 3);
  for (std::size_t n = 1; n < 3; ++n) CHECK(s.events[n].time > s.events[n - 1].time);
}
