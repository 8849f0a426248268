// Pathwise experiments: forward/dual identity, martingale suite, noiseless
// dynamics, and finite-box uniqueness.

#include <algorithm>
#include <cmath>
#include <sstream>

#include "experiment_impl.hpp"
#include "harness/dual.hpp"
#include "harness/engine.hpp"
#include "harness/gibbs.hpp"
#include "harness/parallel.hpp"
#include "harness/rng.hpp"
#include "harness/stats.hpp"

namespace harness::detail {

namespace {

constexpr double kExactTol = 1e-9;
constexpr double kMassTol = 1e-12;
constexpr double kHarmonicTol = 1e-12;
constexpr double kSigmaBand = 3.0;

Region centered_box(int dim, int half, bool pin_origin, BoundaryMode mode = BoundaryMode::fixed_gamma) {
  Region r = Region::cube(dim, -half, half, mode);
  return pin_origin ? r.with_pinned({Site{}}) : r;
}

HeightField random_field(const Region& region, std::uint64_t key, double scale) {
  HeightField h = field_from(region, [&](const Site& s) { return site_uniform(key, s, scale); });
  for (int p : region.pinned_indices()) h[static_cast<std::size_t>(p)] = 0.0;
  return h;
}

}  // namespace

Report representation_check(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const int runs = param<int>(config, "runs_per_dimension", 100);
  const double window = param<double>(config, "window", 5.0);
  const int anchors = param<int>(config, "anchors", 8);
  const auto dims = param<std::vector<int>>(config, "dimensions", {1, 2, 3});
  const int sides[] = {5, 7, 9};
  const NoiseLaw laws[] = {NoiseLaw::gaussian, NoiseLaw::uniform, NoiseLaw::rademacher};
  const char* kernel_names[] = {"nearest", "drift", "range2"};

  Report report;
  report.oracle = "forward engine on the same stream (independent code path)";
  std::ostringstream csv;
  csv << "d,run,kernel,noise,pinned,side,events,max_residual,max_mass_drift\n";
  double overall = 0.0, overall_drift = 0.0;
  for (int d : dims) {
    const auto kernels = test_kernels(d);
    struct Run {
      double residual = 0.0, drift = 0.0;
      std::size_t events = 0;
    };
    const auto out = map_replicas(runs, [&](int r) {
      const std::uint64_t key = derive_key(derive_key(seed, static_cast<std::uint64_t>(d)), static_cast<std::uint64_t>(r));
      Kernel k = kernels[static_cast<std::size_t>(r % 3)];
      k.noise = laws[(r / 3) % 3];
      k.sigma = r % 5 == 4 ? 0.5 : 1.0;
      const int side = sides[(r / 9) % 3];
      Region region = centered_box(d, side / 2, r % 2 == 1);
      region.fill_gamma(k, [&](const Site& s) { return site_uniform(derive_key(key, 1), s, 1.0); });
      const HeightField zeta = random_field(region, derive_key(key, 2), 1.0);
      const EventStream events = generate_events(k, region, {0.0, window}, derive_key(key, 3));
      const Lattice lattice(k, region);
      const HeightField forward = evolve(events, lattice, zeta).final;
      CounterRng pick(derive_key(key, 4));
      Run run;
      run.events = events.events.size();
      for (int a = 0; a < anchors; ++a) {
        const int anchor = a == 0 ? *region.index_of(Site{}) : static_cast<int>(pick() % region.size());
        const DualWeights w = backward_weights(events, lattice, anchor, window, 0.0, {true});
        const double dual = dual_height(w, events, lattice, zeta);
        run.residual = std::max(run.residual, std::abs(forward[static_cast<std::size_t>(anchor)] - dual));
        run.drift = std::max({run.drift, w.max_mass_drift, std::abs(w.interior_mass() + w.absorbed_mass() - 1.0)});
      }
      return run;
    });
    double worst = 0.0, drift = 0.0;
    for (int r = 0; r < runs; ++r) {
      const Run& run = out[static_cast<std::size_t>(r)];
      worst = std::max(worst, run.residual);
      drift = std::max(drift, run.drift);
      csv << d << ',' << r << ',' << kernel_names[r % 3] << ',' << to_string(laws[(r / 3) % 3]) << ','
          << (r % 2) << ',' << sides[(r / 9) % 3] << ',' << run.events << ',' << run.residual << ','
          << run.drift << '\n';
    }
    overall = std::max(overall, worst);
    overall_drift = std::max(overall_drift, drift);
    report.checks.push_back(make_check("max |forward - dual|, d=" + std::to_string(d), worst <= kExactTol, worst,
                                       kExactTol, "<=", {{"runs", runs}, {"anchors_per_run", anchors}}));
  }
  report.checks.push_back(make_check("backward mass conservation", overall_drift <= kMassTol, overall_drift,
                                     kMassTol, "<="));
  report.results = {{"max_residual", overall}, {"max_mass_drift", overall_drift}};
  report.data.emplace_back("representation.csv", csv.str());
  return report;
}

Report martingale_experiment(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const int replicas = param<int>(config, "replicas", 10000);
  const int dim = param<int>(config, "d", 2);
  const auto halves = param<std::vector<int>>(config, "box_halves", {2, 3, 4});
  const auto lags = param<std::vector<double>>(config, "s_grid", {0.0, 1.0, 2.0, 4.0, 8.0, 16.0});
  if (lags.size() < 2 || halves.empty()) throw Error(ErrorKind::SchemaError, "need >= 2 lags and >= 1 box");
  const Kernel k = Kernel::nearest_neighbor(dim);
  std::vector<Region> boxes;
  for (int h : halves) boxes.push_back(centered_box(dim, h, false));
  const Region& outer = boxes.back();
  std::vector<Lattice> lattices;
  for (const Region& b : boxes) lattices.emplace_back(k, b);
  const double t = 0.0;
  const double span = lags.back();
  const std::size_t M = lags.size(), B = boxes.size();

  struct Row {
    std::vector<double> heights;     // outer box, per lag
    std::vector<double> cond;        // outer box, sum of b^2 per lag
    std::vector<double> box_heights; // per box, largest lag
    std::vector<double> box_cond;    // per box, largest lag
    long violations = 0;             // inner weight above outer weight
  };
  const auto rows = map_replicas(replicas, [&](int r) {
    const EventStream big = generate_events(k, outer, {t - span, t}, derive_key(seed, static_cast<std::uint64_t>(r)));
    Row row;
    row.cond.assign(M, 0.0);
    std::vector<std::vector<double>> weights(B, std::vector<double>(big.events.size(), 0.0));
    for (std::size_t b = 0; b < B; ++b) {
      const EventStream stream = b + 1 == B ? big : restrict_stream(big, outer, boxes[b]);
      const int anchor = *boxes[b].index_of(Site{});
      const double ls[] = {span};
      row.box_heights.push_back(flat_dual_profile(stream, lattices[b], anchor, t, ls).front());
      double cond = 0.0;
      scan_epoch_weights(stream, lattices[b], anchor, t, t - span, [&](std::int32_t id, double w) {
        const auto src = b + 1 == B ? id : stream.source_ids[static_cast<std::size_t>(id)];
        weights[b][static_cast<std::size_t>(src)] = w;
        cond += w * w;
      });
      row.box_cond.push_back(cond);
    }
    row.heights = flat_dual_profile(big, lattices.back(), *outer.index_of(Site{}), t, lags);
    for (std::size_t e = 0; e < big.events.size(); ++e) {
      const double w2 = weights[B - 1][e] * weights[B - 1][e];
      for (std::size_t m = 0; m < M; ++m) {
        if (big.events[e].time > t - lags[m]) row.cond[m] += w2;
      }
      for (std::size_t b = 0; b + 1 < B; ++b) {
        if (weights[b][e] > weights[b + 1][e] + 1e-15) ++row.violations;
      }
    }
    return row;
  });

  Report report;
  report.oracle = "zero-mean increments; paired second-moment differences; exact weight comparison on shared streams";
  const double sigma_band = kSigmaBand;
  std::ostringstream csv;
  csv << "replica,m,increment\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t m = 0; m + 1 < M; ++m) csv << r << ',' << m << ',' << rows[r].heights[m + 1] - rows[r].heights[m] << '\n';
  }
  report.data.emplace_back("increments.csv", csv.str());

  Json incs = Json::array(), windows = Json::array(), box_json = Json::array();
  double worst_z = 0.0;
  for (std::size_t m = 0; m + 1 < M; ++m) {
    std::vector<double> xs;
    for (const Row& row : rows) xs.push_back(row.heights[m + 1] - row.heights[m]);
    const Estimate e = estimate(xs);
    worst_z = std::max(worst_z, e.z(0.0));
    incs.push_back({{"from", lags[m]}, {"to", lags[m + 1]}, {"mean", e.mean}, {"stderr", e.stderr_}, {"z", e.z(0.0)}});
  }
  report.checks.push_back(make_check("increment means within 3 SE of 0", worst_z <= sigma_band, worst_z, sigma_band,
                                     "max |z| <=", {{"increments", incs}}));

  // Second moments along the window grid and across boxes, compared pairwise.
  auto paired_growth = [&](auto&& first, auto&& second) {
    std::vector<double> diff;
    for (const Row& row : rows) diff.push_back(second(row) * second(row) - first(row) * first(row));
    return estimate(diff);
  };
  double worst_drop = 0.0;
  long cond_violations = 0;
  for (std::size_t m = 0; m + 1 < M; ++m) {
    const Estimate g = paired_growth([&](const Row& r) { return r.heights[m]; },
                                     [&](const Row& r) { return r.heights[m + 1]; });
    windows.push_back({{"lag", lags[m + 1]}, {"growth", g.mean}, {"growth_stderr", g.stderr_}});
    if (g.stderr_ > 0.0) worst_drop = std::max(worst_drop, -g.mean / g.stderr_);
    for (const Row& row : rows) cond_violations += row.cond[m + 1] < row.cond[m] - 1e-15;
  }
  report.checks.push_back(make_check("window variances nondecreasing (paired, 3 SE)", worst_drop <= sigma_band,
                                     worst_drop, sigma_band, "max drop/SE <=", {{"windows", windows}}));
  double worst_box_drop = 0.0;
  long box_cond_violations = 0;
  for (std::size_t b = 0; b + 1 < B; ++b) {
    const Estimate g = paired_growth([&](const Row& r) { return r.box_heights[b]; },
                                     [&](const Row& r) { return r.box_heights[b + 1]; });
    box_json.push_back({{"half", halves[b + 1]}, {"growth", g.mean}, {"growth_stderr", g.stderr_}});
    if (g.stderr_ > 0.0) worst_box_drop = std::max(worst_box_drop, -g.mean / g.stderr_);
    for (const Row& row : rows) box_cond_violations += row.box_cond[b + 1] < row.box_cond[b] - 1e-15;
  }
  report.checks.push_back(make_check("box variances nondecreasing (paired, 3 SE)", worst_box_drop <= sigma_band,
                                     worst_box_drop, sigma_band, "max drop/SE <=", {{"boxes", box_json}}));
  long weight_violations = 0;
  for (const Row& row : rows) weight_violations += row.violations;
  report.checks.push_back(make_check("b-weights monotone in the box", weight_violations == 0,
                                     static_cast<double>(weight_violations), 0.0, "==",
                                     {{"conditional_variance_drops_window", cond_violations},
                                      {"conditional_variance_drops_box", box_cond_violations}}));
  report.checks.push_back(make_check("conditional variances monotone", cond_violations + box_cond_violations == 0,
                                     static_cast<double>(cond_violations + box_cond_violations), 0.0, "=="));
  Json second = Json::array();
  for (std::size_t m = 0; m < M; ++m) {
    double s2 = 0.0, cv = 0.0;
    for (const Row& row : rows) {
      s2 += row.heights[m] * row.heights[m];
      cv += row.cond[m];
    }
    second.push_back({{"lag", lags[m]}, {"second_moment", s2 / replicas}, {"mean_conditional_variance", cv / replicas}});
  }
  report.results = {{"window_moments", second}, {"replicas", replicas}};
  return report;
}

Report no_noise_harmonic(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const int runs = param<int>(config, "runs", 20);
  const double window = param<double>(config, "window", 10.0);

  Report report;
  report.oracle = "harmonic initial data (exact fixed point) and the additive split on a shared stream";
  struct Case {
    std::string name;
    Kernel k;
    Region region;
    std::function<double(const Site&)> h;
  };
  std::vector<Case> cases;
  {
    std::vector<KernelEntry> wide = {{make_site({1}), 0.3}, {make_site({-1}), 0.3}, {make_site({2}), 0.2}, {make_site({-2}), 0.2}};
    cases.push_back({"d1 nearest, linear", Kernel::nearest_neighbor(1), centered_box(1, 6, false),
                     [](const Site& s) { return 2.0 * s[0] + 1.0; }});
    cases.push_back({"d1 range2, linear", Kernel::from_weights(1, wide), centered_box(1, 6, false),
                     [](const Site& s) { return -0.5 * s[0] + 3.0; }});
    cases.push_back({"d2 nearest, x^2-y^2+3x", Kernel::nearest_neighbor(2), centered_box(2, 3, false),
                     [](const Site& s) { return double(s[0]) * s[0] - double(s[1]) * s[1] + 3.0 * s[0]; }});
    cases.push_back({"d3 nearest, linear", Kernel::nearest_neighbor(3), centered_box(3, 2, false),
                     [](const Site& s) { return s[0] + 2.0 * s[1] - s[2]; }});
    cases.push_back({"d2 drift, constant", test_kernels(2)[1], centered_box(2, 3, false),
                     [](const Site&) { return 3.0; }});
  }
  double worst_fixed = 0.0;
  Json per_case = Json::array();
  for (std::size_t c = 0; c < cases.size(); ++c) {
    Case& cs = cases[c];
    cs.region.fill_gamma(cs.k, cs.h);
    const HeightField h = field_from(cs.region, cs.h);
    const Lattice lattice(cs.k, cs.region);
    const auto drift = map_replicas(runs, [&](int r) {
      const EventStream ev = generate_events(cs.k, cs.region, {0.0, window}, derive_key(derive_key(seed, c), r));
      const HeightField out = evolve(ev, lattice, h, Dynamics::no_noise).final;
      double worst = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) worst = std::max(worst, std::abs(out[i] - h[i]));
      return worst;
    });
    const double w = *std::max_element(drift.begin(), drift.end());
    worst_fixed = std::max(worst_fixed, w);
    per_case.push_back({{"case", cs.name}, {"max_drift", w}});
  }
  report.checks.push_back(make_check("harmonic data invariant under noiseless dynamics", worst_fixed <= kHarmonicTol,
                                     worst_fixed, kHarmonicTol, "<=", {{"cases", per_case}}));

  double worst_split = 0.0, worst_flat = 0.0;
  for (int d = 1; d <= 3; ++d) {
    const auto kernels = test_kernels(d);
    const auto res = map_replicas(runs, [&](int r) {
      const std::uint64_t key = derive_key(derive_key(seed, 100 + d), r);
      const Kernel& k = kernels[static_cast<std::size_t>(r % 3)];
      const int half = d == 3 ? 2 : 3;
      Region with_gamma = centered_box(d, half, r % 2 == 1);
      with_gamma.fill_gamma(k, [&](const Site& s) { return site_uniform(derive_key(key, 1), s, 2.0); });
      const Region flat = centered_box(d, half, r % 2 == 1);
      const HeightField zeta = random_field(flat, derive_key(key, 2), 2.0);
      const EventStream ev = generate_events(k, flat, {0.0, window}, derive_key(key, 3));
      const HeightField full = evolve(ev, k, with_gamma, zeta, Dynamics::standard).final;
      const HeightField noise = evolve(ev, k, flat, flat_field(flat), Dynamics::standard).final;
      const HeightField initial = evolve(ev, k, with_gamma, zeta, Dynamics::no_noise).final;
      const HeightField zero = evolve(ev, k, flat, flat_field(flat), Dynamics::no_noise).final;
      double split = 0.0, still = 0.0;
      for (std::size_t i = 0; i < full.size(); ++i) {
        split = std::max(split, std::abs(full[i] - noise[i] - initial[i]));
        still = std::max(still, std::abs(zero[i]));
      }
      return std::pair{split, still};
    });
    for (const auto& [s, f] : res) {
      worst_split = std::max(worst_split, s);
      worst_flat = std::max(worst_flat, f);
    }
  }
  report.checks.push_back(make_check("standard = noise part + noiseless part", worst_split <= kExactTol, worst_split,
                                     kExactTol, "<="));
  report.checks.push_back(make_check("flat zero stays zero without noise", worst_flat == 0.0, worst_flat, 0.0, "=="));
  report.results = {{"max_harmonic_drift", worst_fixed}, {"max_split_residual", worst_split}};
  return report;
}

Report uniqueness_finite(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const int replicas = param<int>(config, "replicas", 20000);
  const double u = param<double>(config, "u", 2.0);
  const int couplings = param<int>(config, "couplings", 200);
  const auto windows = param<std::vector<double>>(config, "windows", {10.0, 20.0, 50.0});
  const double mass_limit = 1e-3;

  Report report;
  report.oracle = "Gibbs covariance (linear solve) for invariance; surviving backward mass for contraction";
  const Kernel k = Kernel::nearest_neighbor(2);
  const Region region = centered_box(2, 1, false);
  const GibbsModel model = build_model(k, region);
  const Lattice lattice(k, region);

  // Invariance: Gibbs start, evolve for time u, compare coordinate moments.
  const auto finals = map_replicas(replicas, [&](int r) {
    const std::uint64_t key = derive_key(seed, r);
    HeightField h = sample_with(model, model.factor, derive_key(key, 0));
    const EventStream ev = generate_events(k, region, {0.0, u}, derive_key(key, 1));
    advance(ev, lattice, h.values, Dynamics::standard, u);
    return h.values;
  });
  double worst_mean = 0.0, worst_var = 0.0;
  Json coords = Json::array();
  for (std::size_t a = 0; a < model.dim(); ++a) {
    std::vector<double> xs;
    for (const auto& f : finals) xs.push_back(f[static_cast<std::size_t>(model.free_sites[a])]);
    const Estimate e = estimate(xs);
    const double target = model.covariance(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
    const double zv = std::abs(e.variance - target) / variance_stderr(xs);
    worst_mean = std::max(worst_mean, e.z(0.0));
    worst_var = std::max(worst_var, zv);
    coords.push_back({{"mean", e.mean}, {"variance", e.variance}, {"target", target}, {"z_mean", e.z(0.0)}, {"z_var", zv}});
  }
  report.checks.push_back(make_check("Gibbs means preserved (3 SE)", worst_mean <= kSigmaBand, worst_mean, kSigmaBand,
                                     "max |z| <=", {{"coordinates", coords}}));
  report.checks.push_back(make_check("Gibbs variances preserved (3 SE)", worst_var <= kSigmaBand, worst_var,
                                     kSigmaBand, "max |z| <="));

  // Contraction: two starts, one stream; the gap is carried by the surviving mass.
  const double horizon = *std::max_element(windows.begin(), windows.end());
  struct Coupled {
    std::vector<double> mass;  // max over anchors, per window
    double excess = 0.0;       // max |gap| - mass * max initial gap
  };
  const auto coupled = map_replicas(couplings, [&](int r) {
    const std::uint64_t key = derive_key(derive_key(seed, 7), r);
    const HeightField z1 = random_field(region, derive_key(key, 0), 5.0);
    const HeightField z2 = random_field(region, derive_key(key, 1), 5.0);
    double gap0 = 0.0;
    for (std::size_t i = 0; i < z1.size(); ++i) gap0 = std::max(gap0, std::abs(z1[i] - z2[i]));
    const EventStream ev = generate_events(k, region, {0.0, horizon}, derive_key(key, 2));
    const auto a = evolve(ev, lattice, z1, Dynamics::standard, windows);
    const auto b = evolve(ev, lattice, z2, Dynamics::standard, windows);
    Coupled c;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      double worst_mass = 0.0;
      for (std::size_t i = 0; i < region.size(); ++i) {
        const DualWeights dw = backward_weights(ev, lattice, static_cast<int>(i), windows[w], 0.0);
        const double mass = dw.interior_mass();
        const double gap = std::abs(a.snapshots[w].field[i] - b.snapshots[w].field[i]);
        c.excess = std::max(c.excess, gap - mass * gap0);
        worst_mass = std::max(worst_mass, mass);
      }
      c.mass.push_back(worst_mass);
    }
    return c;
  });
  double excess = 0.0;
  std::vector<double> worst_mass(windows.size(), 0.0), mean_mass(windows.size(), 0.0);
  for (const Coupled& c : coupled) {
    excess = std::max(excess, c.excess);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      worst_mass[w] = std::max(worst_mass[w], c.mass[w]);
      mean_mass[w] += c.mass[w] / couplings;
    }
  }
  bool decreasing = true;
  for (std::size_t w = 0; w + 1 < windows.size(); ++w) decreasing = decreasing && mean_mass[w + 1] <= mean_mass[w];
  report.checks.push_back(make_check("coupled gap <= surviving mass x initial gap", excess <= kExactTol, excess,
                                     kExactTol, "<="));
  report.checks.push_back(make_check("surviving mass at the longest window", worst_mass.back() < mass_limit,
                                     worst_mass.back(), mass_limit, "<",
                                     {{"windows", windows}, {"max_mass", worst_mass}, {"mean_mass", mean_mass}}));
  report.checks.push_back(make_check("surviving mass decreases with the window", decreasing,
                                     mean_mass.back(), mean_mass.front(), "mean mass decreasing"));
  report.results = {{"replicas", replicas}, {"couplings", couplings}};
  return report;
}

}  // namespace harness::detail
