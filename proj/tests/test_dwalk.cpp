#include <doctest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <map>
#include <sstream>

#include "harness/dwalk.hpp"
#include "harness/error.hpp"
#include "harness/gibbs.hpp"
#include "harness/stats.hpp"

using namespace harness;

namespace {

std::map<int, double> table_1d(const RateTable& t) {
  std::map<int, double> m;
  for (const auto& [s, r] : t) m[s[0]] += r;
  return m;
}

// d=1 nearest neighbour D-walk by renewal: away from 0 it is a rate-2 simple
// walk with first-passage density f_x(t) = |x|/t e^{-2t} I_x(2t); at 0 it
// leaves at rate 1/2 to +-2. Trapezoid Volterra solve on a uniform grid.
struct RenewalOracle {
  double dt;
  std::vector<double> p0, p1;

  RenewalOracle(double horizon, double step) : dt(step) {
    const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
    auto passage = [](int x, double t) {
      if (t <= 0.0) return x == 1 ? 1.0 : 0.0;  // limit: direct jump rate to 0
      return x / t * std::exp(-2.0 * t) * boost::math::cyl_bessel_i(x, 2.0 * t);
    };
    std::vector<double> f1(n + 1), f2(n + 1), ret(n + 1, 0.0);
    for (std::size_t k = 0; k <= n; ++k) {
      f1[k] = passage(1, k * dt);
      f2[k] = passage(2, k * dt);
    }
    // return-time density: exponential(1/2) holding then first passage from 2
    for (std::size_t k = 1; k <= n; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j <= k; ++j) {
        const double w = (j == 0 || j == k) ? 0.5 : 1.0;
        acc += w * 0.5 * std::exp(-0.5 * j * dt) * f2[k - j];
      }
      ret[k] = acc * dt;
    }
    p0.assign(n + 1, 0.0);
    p0[0] = 1.0;
    for (std::size_t k = 1; k <= n; ++k) {
      double acc = 0.5 * ret[k] * p0[0];
      for (std::size_t j = 1; j < k; ++j) acc += ret[j] * p0[k - j];
      p0[k] = std::exp(-0.5 * k * dt) + dt * acc;  // ret[0] = 0 closes the trapezoid
    }
    p1.assign(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) {
      double acc = 0.5 * (f1[k] * p0[0] + f1[0] * p0[k]);
      for (std::size_t j = 1; j < k; ++j) acc += f1[j] * p0[k - j];
      p1[k] = dt * acc;
    }
  }
  double at(const std::vector<double>& v, double u) const { return v[static_cast<std::size_t>(std::llround(u / dt))]; }
};

}  // namespace

TEST_CASE("jump tables") {
  const DWalkLaw nn = make_dwalk_law(Kernel::nearest_neighbor(1));
  auto off = table_1d(d_jump_distribution(nn, make_site({3})));
  CHECK(off.size() == 2);
  CHECK(off[-1] == doctest::Approx(1.0));
  CHECK(off[1] == doctest::Approx(1.0));
  auto at0 = table_1d(d_jump_distribution(nn, Site{}));
  CHECK(at0[-2] == doctest::Approx(0.25));
  CHECK(at0[0] == doctest::Approx(0.5));
  CHECK(at0[2] == doctest::Approx(0.25));
  CHECK(nn.origin_exit == doctest::Approx(0.5));
  CHECK(nn.off_site_exit == doctest::Approx(2.0));

  const DWalkLaw stuck = make_dwalk_law(Kernel::from_weights(1, {{make_site({1}), 1.0}}));
  auto s0 = table_1d(d_jump_distribution(stuck, Site{}));
  CHECK(s0.size() == 1);
  CHECK(s0[0] == doctest::Approx(1.0));
  CHECK(stuck.origin_exit == 0.0);

  // self-mass: off-site total exit rate is 2 - 2 p(0,0)
  const DWalkLaw lazy = make_dwalk_law(Kernel::from_weights(1, {{make_site({1}), 0.4}, {make_site({-1}), 0.4}, {Site{}, 0.2}}));
  CHECK(lazy.off_site_exit == doctest::Approx(1.6));
  double total = 0.0;
  for (const auto& [s, p] : lazy.at_origin) total += p;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("occupancy at small times") {
  const DWalkLaw law = make_dwalk_law(Kernel::nearest_neighbor(1));
  const UniformizationBackend ub{};
  CHECK(occupancy_probability(law, Site{}, 0.0, ub).value == 1.0);
  CHECK(occupancy_probability(law, make_site({2}), 0.0, ub).value == 0.0);
  const double u = 0.01;
  CHECK(std::abs(occupancy_probability(law, Site{}, u, ub).value - (1.0 - u / 2.0)) <= 2.0 * u * u);
}

TEST_CASE("uniformization matches the renewal oracle") {
  const RenewalOracle oracle(6.0, 2e-3);
  const DWalkLaw law = make_dwalk_law(Kernel::nearest_neighbor(1));
  for (double u : {0.25, 0.5, 1.0, 2.0, 4.0, 6.0}) {
    const DWalkValue a = occupancy_probability(law, Site{}, u, UniformizationBackend{});
    const DWalkValue b = occupancy_probability(law, make_site({1}), u, UniformizationBackend{});
    CHECK(a.error_bound <= 1e-9);
    CHECK(std::abs(a.value - oracle.at(oracle.p0, u)) <= 1e-4);
    CHECK(std::abs(b.value - oracle.at(oracle.p1, u)) <= 1e-4);
  }
}

TEST_CASE("backends agree within 3 binomial standard errors") {
  const DWalkLaw law = make_dwalk_law(Kernel::nearest_neighbor(2));
  for (double u : {0.5, 2.0, 5.0}) {
    for (const Site& i : {Site{}, make_site({1, 0})}) {
      const DWalkValue mc = occupancy_probability(law, i, u, McBackend{20000, 7});
      const DWalkValue un = occupancy_probability(law, i, u, UniformizationBackend{});
      CHECK(std::abs(mc.value - un.value) <= 3.0 * mc.stderr_ + 1e-9);
    }
  }
  // integrals too
  const DWalkValue mc = window_variance(law, 5.0, McBackend{20000, 8});
  const DWalkValue un = window_variance(law, 5.0, UniformizationBackend{});
  CHECK(std::abs(mc.value - un.value) <= 3.0 * mc.stderr_);
}

TEST_CASE("window variance properties") {
  const DWalkLaw law = make_dwalk_law(Kernel::nearest_neighbor(3));
  const UniformizationBackend ub{};
  const double tiny = window_variance(law, 1e-4, ub).value;
  CHECK(tiny / 1e-4 == doctest::Approx(1.0).epsilon(1e-3));
  for (double tau : {0.5, 3.0, 10.0}) CHECK(window_variance(law, tau, ub).value <= tau);
  const double v20 = window_variance(law, 20.0, ub).value;
  const double v40 = window_variance(law, 40.0, ub).value;
  CHECK(v40 > v20);
  // the d=3 occupation integral converges: later doublings add less
  const auto mc = residual_tail_profile(law, std::vector<double>{20.0, 40.0}, 80.0, McBackend{4000, 3});
  CHECK(mc[0].value > mc[1].value);
  CHECK(mc[1].value < (v40 - v20) + 3 * mc[1].stderr_);
}

TEST_CASE("difference variance") {
  const DWalkLaw law = make_dwalk_law(Kernel::nearest_neighbor(1));
  const UniformizationBackend ub{};
  CHECK(difference_variance(law, Site{}, 5.0, ub).value == 0.0);
  double prev = 0.0;
  for (double tau : {1.0, 5.0, 20.0, 80.0}) {
    const double v = difference_variance(law, make_site({1}), tau, ub).value;
    CHECK(v >= prev);
    prev = v;
  }
  const double green = green_entry(Kernel::nearest_neighbor(1), Region::cube(1, -1000, 1000).with_pinned({Site{}}),
                                   make_site({1}), make_site({1}));
  CHECK(green == doctest::Approx(2.0 * 1000.0 / 1001.0));
  const double far = difference_variance(law, make_site({1}), 2e4, ub).value;
  CHECK(std::abs(far - green) < 0.03);
}

TEST_CASE("symmetry, domination and additivity") {
  const DWalkLaw law = make_dwalk_law(Kernel::nearest_neighbor(2));
  const UniformizationBackend ub{};
  for (double u : {0.3, 1.0, 4.0}) {
    const double p0 = occupancy_probability(law, Site{}, u, ub).value;
    const double pa = occupancy_probability(law, make_site({1, 2}), u, ub).value;
    const double pb = occupancy_probability(law, make_site({-1, -2}), u, ub).value;
    CHECK(std::abs(pa - pb) <= 1e-9);
    CHECK(p0 >= pa);
  }
  const double tail = residual_tail(law, 2.0, 9.0, ub).value;
  CHECK(std::abs(tail - (window_variance(law, 9.0, ub).value - window_variance(law, 2.0, ub).value)) <= 1e-8);
  // quadrature of the occupancy reproduces the exact integral
  const double q = adaptive_simpson([&](double u) { return occupancy_probability(law, Site{}, u, ub).value; }, 0.0, 3.0);
  CHECK(q == doctest::Approx(window_variance(law, 3.0, ub).value).epsilon(1e-4));
}

TEST_CASE("small truncation radius is reported") {
  const DWalkLaw law = make_dwalk_law(Kernel::nearest_neighbor(1));
  try {
    occupancy_probability(law, Site{}, 50.0, UniformizationBackend{2, 1e-9});
    FAIL("expected TruncationTooSmall");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TruncationTooSmall);
  }
}

TEST_CASE("occupancy grid csv") {
  const DWalkLaw law = make_dwalk_law(Kernel::nearest_neighbor(1));
  std::ostringstream out;
  const std::vector<double> us = {0.0, 1.0, 2.0};
  write_occupancy_grid(out, law, make_site({1}), us, UniformizationBackend{});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "u,p_origin,p_site,ci");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}
