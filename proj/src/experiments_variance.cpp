// Variance experiments: simulated window variances against D-walk occupation
// integrals, and the exponents of their residual tails.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "experiment_impl.hpp"
#include "harness/dual.hpp"
#include "harness/dwalk.hpp"
#include "harness/engine.hpp"
#include "harness/gibbs.hpp"
#include "harness/parallel.hpp"
#include "harness/rng.hpp"
#include "harness/stats.hpp"

namespace harness::detail {

namespace {

constexpr double kSigmaBand = 3.0;

DWalkBackend backend_from(const Json& config, const char* key, std::uint64_t seed, const char* fallback) {
  const Json b = config.contains(key) ? config.at(key) : Json::object();
  const auto kind = param<std::string>(b, "kind", fallback);
  if (kind == "uniformization") {
    return UniformizationBackend{param<int>(b, "radius", 0), param<double>(b, "tol", 1e-9)};
  }
  if (kind == "mc") return McBackend{param<int>(b, "replicas", 10000), param<std::uint64_t>(b, "seed", seed)};
  throw Error(ErrorKind::SchemaError, std::string("unknown backend '") + kind + "'");
}

Json value_json(const DWalkValue& v) {
  return {{"value", v.value}, {"stderr", v.stderr_}, {"error_bound", v.error_bound}, {"radius", v.radius}};
}

}  // namespace

Report window_variance_experiment(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const int dim = param<int>(config, "d", 3);
  const int half = param<int>(config, "box_half", 10);
  const int replicas = param<int>(config, "replicas", 10000);
  const double window = param<double>(config, "window", 20.0);

  const Kernel k = Kernel::nearest_neighbor(dim);
  const Region region = Region::cube(dim, -half, half);
  const Lattice lattice(k, region);
  const auto origin = static_cast<std::size_t>(*region.index_of(Site{}));
  const auto heights = map_replicas(replicas, [&](int r) {
    const EventStream ev = generate_events(k, region, {0.0, window}, derive_key(seed, static_cast<std::uint64_t>(r)));
    std::vector<double> h(region.size(), 0.0);
    advance(ev, lattice, h, Dynamics::standard, window);
    return h[origin];
  });

  const DWalkLaw law = make_dwalk_law(k);
  const DWalkValue ref = window_variance(law, window, UniformizationBackend{});
  const Estimate e = estimate(heights);
  const double se = variance_stderr(heights);
  const double z = std::abs(e.variance - ref.value) / se;

  Report report;
  report.oracle = "integral of P(D_u = 0) by uniformization, certified truncation bound";
  report.checks.push_back(make_check("simulated variance vs occupation integral (3 SE)", z <= kSigmaBand, z,
                                     kSigmaBand, "|z| <=",
                                     {{"variance", e.variance}, {"variance_stderr", se}, {"reference", ref.value},
                                      {"reference_bound", ref.error_bound}}));
  report.checks.push_back(make_check("flat start keeps mean 0 (3 SE)", e.z(0.0) <= kSigmaBand, e.z(0.0), kSigmaBand,
                                     "|z| <=", {{"mean", e.mean}, {"stderr", e.stderr_}}));
  std::ostringstream csv;
  csv << "replica,height\n";
  for (std::size_t r = 0; r < heights.size(); ++r) csv << r << ',' << heights[r] << '\n';
  report.data.emplace_back("heights.csv", csv.str());
  report.results = {{"variance", e.variance}, {"variance_stderr", se}, {"reference", value_json(ref)},
                    {"box_half", half}, {"replicas", replicas}};
  return report;
}

Report difference_variance_experiment(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const int half = param<int>(config, "box_half", 120);
  const int replicas = param<int>(config, "replicas", 10000);
  auto windows = param<std::vector<double>>(config, "windows", {10.0, 40.0, 160.0, 320.0});
  const int green_half = param<int>(config, "green_box_half", 1000);
  const int i = param<int>(config, "i", 1);
  if (windows.size() < 2) throw Error(ErrorKind::SchemaError, "need at least two windows");
  std::sort(windows.begin(), windows.end());

  const Kernel k = Kernel::nearest_neighbor(1);
  const Region region = Region::cube(1, -half, half);
  const Lattice lattice(k, region);
  const int a0 = *region.index_of(Site{});
  const int a1 = *region.index_of(make_site({i}));
  const double t = 0.0;
  // diff[r][w] = eta(i) - eta(0) for the flat start at time t - windows[w].
  const auto diffs = map_replicas(replicas, [&](int r) {
    const EventStream ev = generate_events(k, region, {t - windows.back(), t}, derive_key(seed, static_cast<std::uint64_t>(r)));
    const auto h0 = flat_dual_profile(ev, lattice, a0, t, windows);
    const auto h1 = flat_dual_profile(ev, lattice, a1, t, windows);
    std::vector<double> d(windows.size());
    for (std::size_t w = 0; w < windows.size(); ++w) d[w] = h1[w] - h0[w];
    return d;
  });

  const DWalkLaw law = make_dwalk_law(k);
  const Site si = make_site({i});
  // Stationary oracle: variance of eta(i) with the origin pinned, by a sparse solve.
  const Region pinned = Region::cube(1, -green_half, green_half).with_pinned({Site{}});
  const double green = green_entry(k, pinned, si, si);

  Report report;
  report.oracle = "uniformized D-walk integrals per window; pinned Green's function for the limit";
  Json per_window = Json::array();
  std::ostringstream csv;
  csv << "window,mc_mean,mc_stderr,dwalk,dwalk_bound\n";
  double worst_z = 0.0;
  std::vector<double> refs;
  Estimate last{};
  for (std::size_t w = 0; w < windows.size(); ++w) {
    std::vector<double> sq;
    sq.reserve(diffs.size());
    for (const auto& d : diffs) sq.push_back(d[w] * d[w]);
    const Estimate e = estimate(sq);
    const DWalkValue ref = difference_variance(law, si, windows[w], UniformizationBackend{});
    refs.push_back(ref.value);
    worst_z = std::max(worst_z, e.z(ref.value));
    per_window.push_back({{"window", windows[w]}, {"mean", e.mean}, {"stderr", e.stderr_}, {"dwalk", ref.value},
                          {"z", e.z(ref.value)}});
    csv << windows[w] << ',' << e.mean << ',' << e.stderr_ << ',' << ref.value << ',' << ref.error_bound << '\n';
    last = e;
  }
  report.data.emplace_back("difference_variance.csv", csv.str());
  report.checks.push_back(make_check("E(eta(i)-eta(0))^2 vs D-walk integral per window (3 SE)", worst_z <= kSigmaBand,
                                     worst_z, kSigmaBand, "max |z| <=", {{"windows", per_window}}));
  bool increasing = true;
  for (std::size_t w = 0; w + 1 < refs.size(); ++w) increasing = increasing && refs[w + 1] > refs[w];
  report.checks.push_back(make_check("D-walk sequence increases with the window", increasing, refs.back(), refs.front(),
                                     "increasing"));
  // The longest window plus its remaining D-walk tail estimates the stationary value.
  const double s_max = param<double>(config, "tail_s_max", 1e5);
  const double limit = difference_variance(law, si, s_max, UniformizationBackend{}).value;
  const double tail = limit - refs.back();
  const double extrapolated = last.mean + tail;
  const double zg = std::abs(extrapolated - green) / last.stderr_;
  report.checks.push_back(make_check("longest window + D-walk tail vs Green's function (3 SE)", zg <= kSigmaBand, zg,
                                     kSigmaBand, "|z| <=",
                                     {{"mc_longest", last.mean}, {"tail", tail}, {"green", green},
                                      {"green_box_half", green_half}}));
  const double limit_gap = std::abs(limit - green);
  report.checks.push_back(make_check("D-walk limit vs Green's function", limit_gap <= 1e-2, limit_gap, 1e-2, "<=",
                                     {{"dwalk_limit", limit}, {"s_max", s_max}, {"green", green}}));
  const double z2 = std::abs(last.mean - green) / last.stderr_;
  report.checks.push_back(make_check("longest window vs Green's function (3 SE)", z2 <= kSigmaBand, z2, kSigmaBand,
                                     "|z| <=", {{"mc_longest", last.mean}, {"stderr", last.stderr_}, {"green", green}}));
  report.results = {{"green", green}, {"dwalk_limit", limit}, {"replicas", replicas}};
  return report;
}

Report convergence_rate(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const auto s_grid = param<std::vector<double>>(config, "s_grid", {10.0, 20.0, 40.0, 80.0, 160.0, 300.0});
  const double s_max = param<double>(config, "s_max", 1e4);
  const double lo = param<double>(config, "band_low", -0.65);
  const double hi = param<double>(config, "band_high", -0.35);
  const int dim = param<int>(config, "d", 3);
  // Uniformization in d=3 would need a box of radius ~ sqrt(s_max) per axis, so chains there.
  DWalkBackend b3 = backend_from(config, "backend_d3", seed, "mc");
  if (auto* mc = std::get_if<McBackend>(&b3); mc && !config.contains("backend_d3")) mc->replicas = 20000;
  const DWalkBackend b1 = backend_from(config, "backend_d1", seed, "uniformization");

  Report report;
  report.oracle = "exponents 1 - d/2 and -d/2 (fixed by theory); tails from D-walk chains";
  std::ostringstream csv;
  csv << "series,s,value,stderr,bound\n";
  auto fit_series = [&](const std::string& name, const std::vector<DWalkValue>& vals, double theory) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t n = 0; n < s_grid.size(); ++n) {
      pts.emplace_back(s_grid[n], vals[n].value);
      csv << name << ',' << s_grid[n] << ',' << vals[n].value << ',' << vals[n].stderr_ << ',' << vals[n].error_bound
          << '\n';
    }
    const PowerLawFit f = fit_power_law(pts);
    report.checks.push_back(make_check(name + " exponent in band", f.exponent >= lo && f.exponent <= hi, f.exponent,
                                       theory, "in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
                                       {{"stderr", f.stderr_}, {"intercept", f.intercept}, {"s_max", s_max}}));
    return f;
  };
  const DWalkLaw law3 = make_dwalk_law(Kernel::nearest_neighbor(dim));
  const auto tail3 = residual_tail_profile(law3, s_grid, s_max, b3);
  const PowerLawFit f3 = fit_series("residual tail d=" + std::to_string(dim), tail3, 1.0 - dim / 2.0);

  const DWalkLaw law1 = make_dwalk_law(Kernel::nearest_neighbor(1));
  const auto tail1 = difference_residual_profile(law1, make_site({1}), s_grid, s_max, b1);
  const PowerLawFit f1 = fit_series("difference residual d=1", tail1, -0.5);

  // Shorter horizon for reference: the finite cutoff bends the d=1 tail.
  const double short_max = param<double>(config, "short_s_max", 1e3);
  const auto short1 = difference_residual_profile(law1, make_site({1}), s_grid, short_max, b1);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t n = 0; n < s_grid.size(); ++n) pts.emplace_back(s_grid[n], short1[n].value);
  const PowerLawFit fs = fit_power_law(pts);
  report.data.emplace_back("tails.csv", csv.str());
  report.results = {{"exponent_d3", f3.exponent}, {"exponent_d1", f1.exponent},
                    {"exponent_d1_short_horizon", fs.exponent}, {"short_s_max", short_max}};
  return report;
}

}  // namespace harness::detail
