#include <doctest.h>

#include <cmath>

#include "harness/error.hpp"
#include "harness/lattice.hpp"
#include "harness/rng.hpp"

using namespace harness;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::SchemaError;
}

}  // namespace

TEST_CASE("kernel validation") {
  CHECK_NOTHROW(validate_kernel(Kernel::from_weights(1, {{make_site({-1}), 0.5}, {make_site({1}), 0.5}})));
  const Kernel heavy = Kernel::from_weights(1, {{make_site({-1}), 0.6}, {make_site({1}), 0.6}});
  CHECK(kind_of([&] { validate_kernel(heavy); }) == ErrorKind::NonStochastic);
  const Kernel nn2 = Kernel::nearest_neighbor(2);
  CHECK_NOTHROW(validate_kernel(nn2));
  CHECK(nn2.range == 1);
  CHECK(nn2.weight(make_site({0, 1})) == doctest::Approx(0.25));

  Kernel bad = Kernel::nearest_neighbor(1);
  bad.range = 0;
  CHECK(kind_of([&] { validate_kernel(bad); }) == ErrorKind::RangeViolation);
  Kernel empty;
  CHECK(kind_of([&] { validate_kernel(empty); }) == ErrorKind::EmptySupport);
}

TEST_CASE("range uses the max norm") {
  const Kernel k = Kernel::from_weights(2, {{make_site({1, 1}), 0.5}, {make_site({-1, -1}), 0.5}});
  CHECK(k.range == 1);
  CHECK(max_norm(make_site({2, -3})) == 3);
}

TEST_CASE("p_average examples") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, 0, 4);
  CHECK(p_average(k, flat_field(r), r, make_site({2})) == 0.0);
  HeightField h = flat_field(r);
  h[*r.index_of(make_site({2}))] = 4.0;
  CHECK(p_average(k, h, r, make_site({1})) == doctest::Approx(2.0));

  Region line = Region::cube(1, -5, 5);
  line.fill_gamma(k, [](const Site& s) { return double(s[0]); });
  const HeightField lin = field_from(line, [](const Site& s) { return double(s[0]); });
  for (int i = -5; i <= 5; ++i) CHECK(p_average(k, lin, line, make_site({i})) == doctest::Approx(i).epsilon(1e-14));
}

TEST_CASE("uncovered boundary and empty interior") {
  const Kernel k = Kernel::nearest_neighbor(1);
  Region r = Region::cube(1, 0, 3);
  r.set_gamma({{make_site({-1}), 1.0}});
  const HeightField h = flat_field(r);
  CHECK(p_average(k, h, r, make_site({0})) == doctest::Approx(0.5));
  CHECK(kind_of([&] { p_average(k, h, r, make_site({3})); }) == ErrorKind::MissingBoundary);

  const Region lone = Region::cube(1, 0, 0, BoundaryMode::free);
  CHECK(kind_of([&] { free_site_kernel(k, lone, make_site({0})); }) == ErrorKind::ZeroInteriorMass);
}

TEST_CASE("harmonic checks") {
  const Kernel k = Kernel::nearest_neighbor(1);
  Region r = Region::cube(1, -4, 4);
  r.fill_gamma(k, [](const Site& s) { return double(s[0]); });
  CHECK(is_harmonic(k, field_from(r, [](const Site& s) { return double(s[0]); }), r));

  Region sq = Region::cube(1, -4, 4);
  sq.fill_gamma(k, [](const Site& s) { return double(s[0]) * s[0]; });
  CHECK_FALSE(is_harmonic(k, field_from(sq, [](const Site& s) { return double(s[0]) * s[0]; }), sq));
  CHECK(p_average(k, field_from(sq, [](const Site& s) { return double(s[0]) * s[0]; }), sq, make_site({1})) ==
        doctest::Approx(2.0));

  Region c = Region::cube(1, -4, 4);
  c.fill_gamma(k, [](const Site&) { return 3.0; });
  CHECK(is_harmonic(k, flat_field(c, 3.0), c));

  // Sums of harmonic functions with matching boundaries stay harmonic.
  const Kernel k2 = Kernel::nearest_neighbor(2);
  auto f = [](const Site& s) { return double(s[0]) * s[0] - double(s[1]) * s[1]; };
  auto g = [](const Site& s) { return 2.0 * s[0] * s[1] + s[1]; };
  Region sum = Region::cube(2, -3, 3);
  sum.fill_gamma(k2, [&](const Site& s) { return 1.5 * f(s) - 0.5 * g(s); });
  CHECK(is_harmonic(k2, field_from(sum, [&](const Site& s) { return 1.5 * f(s) - 0.5 * g(s); }), sum));
}

TEST_CASE("free_site_kernel examples") {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region r = Region::cube(1, 0, 5, BoundaryMode::free);
  auto w = free_site_kernel(k, r, make_site({2}));
  double total = 0.0;
  for (const auto& [s, p] : w) {
    CHECK(p == doctest::Approx(0.5));
    total += p;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  w = free_site_kernel(k, r, make_site({0}));
  REQUIRE(w.size() == 1);
  CHECK(w[0].first == make_site({1}));
  CHECK(w[0].second == 1.0);
}

TEST_CASE("p_average is linear") {
  const Kernel k = Kernel::from_weights(2, {{make_site({1, 0}), 0.4}, {make_site({-1, 1}), 0.35}, {make_site({0, -2}), 0.25}});
  const Region r = Region::cube(2, -3, 3);
  const HeightField a = field_from(r, [](const Site& s) { return site_key(1, s) % 997 / 50.0; });
  const HeightField b = field_from(r, [](const Site& s) { return site_key(2, s) % 991 / 70.0; });
  HeightField mix = a;
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * a[i] - 3.0 * b[i];
  for (const Site& s : r.sites()) {
    const double lhs = p_average(k, mix, r, s);
    const double rhs = 2.0 * p_average(k, a, r, s) - 3.0 * p_average(k, b, r, s);
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("region geometry") {
  const Region r = Region(2, cube(2, 0, 2), {make_site({1, 1})}, {make_site({0, 0})});
  CHECK(r.size() == 8);
  CHECK_FALSE(r.contains(make_site({1, 1})));
  CHECK(r.is_pinned(*r.index_of(make_site({0, 0}))));
  CHECK(r.shell(1).size() == 17);  // 16 around the box plus the hole
  CHECK(r.fingerprint() != Region::cube(2, 0, 2).fingerprint());
  CHECK(kind_of([] { Region::cube(1, 0, 3).with_pinned({make_site({9})}); }) == ErrorKind::InvalidRegion);
}
