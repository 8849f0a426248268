// Gaussian-field experiments: Green's-function covariance, harness property,
// reversibility, and the nested-box coupling.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "experiment_impl.hpp"
#include "harness/dual.hpp"
#include "harness/events.hpp"
#include "harness/gibbs.hpp"
#include "harness/parallel.hpp"
#include "harness/rng.hpp"
#include "harness/stats.hpp"

namespace harness::detail {

namespace {

constexpr double kSigmaBand = 3.0;
constexpr double kWeightTol = 1e-12;

struct NamedModel {
  std::string name;
  Kernel k;
  Region region;
};

Kernel range2_kernel() {
  return Kernel::from_weights(1, {{make_site({1}), 0.3}, {make_site({-1}), 0.3},
                                  {make_site({2}), 0.2}, {make_site({-2}), 0.2}});
}

Region pinned_box(int dim, int half, BoundaryMode mode = BoundaryMode::fixed_gamma) {
  return Region::cube(dim, -half, half, mode).with_pinned({Site{}});
}

// Sub-stochastic matrix on the free sites straight from the kernel offsets.
// Free boundary renormalises over the carrier, pinned sites included.
Eigen::MatrixXd offset_transition(const NamedModel& m, const std::vector<int>& free_sites) {
  const auto n = static_cast<Eigen::Index>(free_sites.size());
  std::vector<int> pos(m.region.size(), -1);
  for (std::size_t a = 0; a < free_sites.size(); ++a) pos[static_cast<std::size_t>(free_sites[a])] = static_cast<int>(a);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const Site s = m.region.sites()[static_cast<std::size_t>(free_sites[static_cast<std::size_t>(a)])];
    double kept = 0.0;
    for (const KernelEntry& e : m.k.weights) {
      const auto j = m.region.index_of(s + e.offset);
      if (!j) continue;
      kept += e.p;
      if (pos[static_cast<std::size_t>(*j)] >= 0) P(a, pos[static_cast<std::size_t>(*j)]) += e.p;
    }
    if (m.region.boundary() == BoundaryMode::free) P.row(a) /= kept;
  }
  return P;
}

Eigen::MatrixXd power_series(const Eigen::MatrixXd& P) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(P.rows(), P.cols());
  Eigen::MatrixXd term = sum;
  for (int n = 0; n < 1000000; ++n) {
    term = term * P;
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-17) break;
  }
  return sum;
}

}  // namespace

Report gibbs_covariance(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const int samples = param<int>(config, "samples", 100000);
  const int far_half = param<int>(config, "closed_form_half", 200);
  const int far_sites = param<int>(config, "closed_form_sites", 10);
  const double series_tol = 1e-8;
  const double closed_tol = 1e-6;

  Report report;
  report.oracle = "truncated power series of the offset matrix; empirical covariance; gambler's-ruin closed form";
  std::vector<NamedModel> models = {
      {"d1 nearest, pinned [-3,3]", Kernel::nearest_neighbor(1), pinned_box(1, 3)},
      {"d1 nearest, fixed [-5,5]", Kernel::nearest_neighbor(1), Region::cube(1, -5, 5)},
      {"d2 nearest, fixed [-2,2]^2", Kernel::nearest_neighbor(2), Region::cube(2, -2, 2)},
      {"d2 nearest, pinned [-2,2]^2", Kernel::nearest_neighbor(2), pinned_box(2, 2)},
      {"d1 range2, fixed [-4,4]", range2_kernel(), Region::cube(1, -4, 4)},
      {"d2 nearest, free [0,1]^2 pinned at 0", Kernel::nearest_neighbor(2),
       Region::cube(2, 0, 1, BoundaryMode::free).with_pinned({Site{}})},
      {"d3 nearest, fixed [-1,1]^3", Kernel::nearest_neighbor(3), Region::cube(3, -1, 1)},
  };
  double worst_series = 0.0;
  Json per_model = Json::array();
  for (const NamedModel& m : models) {
    const GibbsModel g = build_model(m.k, m.region);
    const Eigen::MatrixXd series = power_series(offset_transition(m, g.free_sites));
    const double err = (series - g.covariance).cwiseAbs().maxCoeff();
    const double inv = (g.precision * g.covariance - Eigen::MatrixXd::Identity(g.precision.rows(), g.precision.cols()))
                           .cwiseAbs()
                           .maxCoeff();
    worst_series = std::max(worst_series, err);
    per_model.push_back({{"model", m.name}, {"free_sites", g.dim()}, {"series_error", err}, {"q_sigma_minus_i", inv}});
  }
  report.checks.push_back(make_check("Sigma = sum of P^n (entrywise)", worst_series <= series_tol, worst_series,
                                     series_tol, "<=", {{"models", per_model}}));

  // Empirical covariance of exact samples, entry by entry.
  const GibbsModel g = build_model(models[0].k, models[0].region);
  const auto fields = sample_field(g, samples, derive_key(seed, 1));
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(fields.size());
  for (const HeightField& f : fields) xs.push_back(g.restrict(f));
  double worst_z = 0.0;
  Json entries = Json::array();
  std::ostringstream csv;
  csv << "a,b,empirical,sigma,stderr,z\n";
  for (Eigen::Index a = 0; a < g.covariance.rows(); ++a) {
    for (Eigen::Index b = a; b < g.covariance.cols(); ++b) {
      std::vector<double> prod;
      prod.reserve(xs.size());
      for (const auto& x : xs) prod.push_back(x[a] * x[b]);
      const Estimate e = estimate(prod);
      const double z = e.z(g.covariance(a, b));
      worst_z = std::max(worst_z, z);
      csv << a << ',' << b << ',' << e.mean << ',' << g.covariance(a, b) << ',' << e.stderr_ << ',' << z << '\n';
    }
  }
  report.data.emplace_back("empirical_covariance.csv", csv.str());
  report.checks.push_back(make_check("empirical covariance within 3 SE entrywise", worst_z <= kSigmaBand, worst_z,
                                     kSigmaBand, "max |z| <=", {{"samples", samples}, {"model", models[0].name}}));

  // Pinned chain: visits to i before absorption at 0 or at the exterior +-(m+1).
  const Kernel nn = Kernel::nearest_neighbor(1);
  const GibbsModel far = build_model(nn, pinned_box(1, far_half));
  const double m1 = far_half + 1.0;
  double worst_closed = 0.0, worst_half_line = 0.0;
  Json diag = Json::array();
  for (int i = -far_sites; i <= far_sites; ++i) {
    if (i == 0) continue;
    const int idx = *far.region.index_of(make_site({i}));
    const auto a = static_cast<Eigen::Index>(far.free_index[static_cast<std::size_t>(idx)]);
    const double var = far.covariance(a, a);
    const double ai = std::abs(i);
    const double closed = 2.0 * ai * (m1 - ai) / m1;
    worst_closed = std::max(worst_closed, std::abs(var - closed));
    worst_half_line = std::max(worst_half_line, std::abs(var - 2.0 * ai));
    diag.push_back({{"i", i}, {"variance", var}, {"closed_form", closed}, {"half_line", 2.0 * ai}});
  }
  report.checks.push_back(make_check("pinned d=1 variance vs closed form at radius " + std::to_string(far_half),
                                     worst_closed <= closed_tol, worst_closed, closed_tol, "<=",
                                     {{"sites", diag}, {"max_gap_to_2|i|", worst_half_line}}));
  report.results = {{"series_error", worst_series}, {"max_entry_z", worst_z}, {"closed_form_error", worst_closed},
                    {"max_gap_to_2|i|", worst_half_line}};
  return report;
}

Report harness_property(const Json&) {
  Report report;
  report.oracle = "kernel weights p(x, y) read off the kernel table";
  std::vector<NamedModel> models;
  const std::vector<std::pair<std::string, Kernel>> kernels = {
      {"d1 nearest", Kernel::nearest_neighbor(1)}, {"d2 nearest", Kernel::nearest_neighbor(2)}, {"d1 range2", range2_kernel()}};
  for (const auto& [name, k] : kernels) {
    const int half = k.dim == 1 ? 6 : 3;
    models.push_back({name + ", fixed", k, Region::cube(k.dim, -half, half)});
    models.push_back({name + ", pinned", k, pinned_box(k.dim, half)});
  }
  double worst = 0.0, worst_diag = 0.0;
  std::size_t checked = 0;
  Json per_model = Json::array();
  for (const NamedModel& m : models) {
    const GibbsModel g = build_model(m.k, m.region);
    double model_worst = 0.0;
    for (std::size_t a = 0; a < g.dim(); ++a) {
      const Site s = m.region.sites()[static_cast<std::size_t>(g.free_sites[a])];
      SiteWeights expected;
      for (const KernelEntry& e : m.k.weights) {
        const auto j = m.region.index_of(s + e.offset);
        if (j && !m.region.is_pinned(*j)) expected.emplace_back(s + e.offset, e.p);
      }
      SiteWeights got = conditional_mean_weights(g, s);
      std::sort(expected.begin(), expected.end());
      std::sort(got.begin(), got.end());
      double err = 0.0;
      if (expected.size() != got.size()) {
        err = 1.0;
      } else {
        for (std::size_t n = 0; n < got.size(); ++n) {
          err = std::max(err, got[n].first == expected[n].first ? std::abs(got[n].second - expected[n].second) : 1.0);
        }
      }
      model_worst = std::max(model_worst, err);
      const auto ai = static_cast<Eigen::Index>(a);
      worst_diag = std::max(worst_diag, std::abs(g.precision(ai, ai) - 1.0));
      ++checked;
    }
    worst = std::max(worst, model_worst);
    per_model.push_back({{"model", m.name}, {"free_sites", g.dim()}, {"max_error", model_worst}});
  }
  report.checks.push_back(make_check("conditional-mean weights = kernel weights", worst <= kWeightTol, worst,
                                     kWeightTol, "<=", {{"models", per_model}, {"sites_checked", checked}}));
  report.checks.push_back(make_check("unit conditional variance (Q diagonal = 1)", worst_diag <= kWeightTol,
                                     worst_diag, kWeightTol, "<="));
  report.results = {{"max_weight_error", worst}, {"sites_checked", checked}};
  return report;
}

Report detailed_balance(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const int replicas = param<int>(config, "replicas", 100000);
  const double u = param<double>(config, "u", 1.0);
  const double pass_below = param<double>(config, "threshold", 4.0);
  const double control_above = param<double>(config, "control_threshold", 5.0);

  Report report;
  report.oracle = "time-reversal symmetry of probe correlations; deliberately broken controls";
  const Kernel nn1 = Kernel::nearest_neighbor(1);
  Json rows = Json::array();
  auto record = [&](const std::string& name, const BalanceResult& r, bool control) {
    const bool ok = control ? r.statistic > control_above : r.statistic < pass_below;
    report.checks.push_back(make_check(name, ok, r.statistic, control ? control_above : pass_below, control ? ">" : "<",
                                       {{"worst_pair", {r.worst_f, r.worst_g}}, {"worst_mean", r.worst_mean},
                                        {"replicas", r.replicas}}));
    rows.push_back({{"case", name}, {"statistic", r.statistic}});
  };

  const Region fixed = Region::cube(1, -3, 3);
  const GibbsModel m_fixed = build_model(nn1, fixed);
  const auto probes_fixed = default_probes(m_fixed);
  record("standard dynamics, d=1 fixed box", detailed_balance_statistic(m_fixed, nn1, fixed, u, replicas,
                                                                        derive_key(seed, 1), probes_fixed), false);

  const Region pinned = pinned_box(1, 3);
  const GibbsModel m_pinned = build_model(nn1, pinned);
  const auto probes_pinned = default_probes(m_pinned);
  record("pinned dynamics, d=1 box pinned at 0", detailed_balance_statistic(m_pinned, nn1, pinned, u, replicas,
                                                                            derive_key(seed, 2), probes_pinned), false);

  const Kernel nn2 = Kernel::nearest_neighbor(2);
  const Region square = Region::cube(2, 0, 1, BoundaryMode::free).with_pinned({Site{}});
  const GibbsModel m_square = build_model(nn2, square);
  const auto probes_square = default_probes(m_square);
  BalanceOptions shift;
  shift.dynamics = BalanceDynamics::shift;
  record("shift dynamics, free square pinned at 0",
         detailed_balance_statistic(m_square, nn2, square, u, replicas, derive_key(seed, 3), probes_square, shift),
         false);

  // Controls: a start law that is not stationary, and a drifted kernel.
  BalanceOptions scaled;
  scaled.initial_factor = std::sqrt(2.0) * m_pinned.factor;
  record("control: covariance scaled x2",
         detailed_balance_statistic(m_pinned, nn1, pinned, u, replicas, derive_key(seed, 4), probes_pinned, scaled),
         true);

  const Kernel drift = Kernel::from_weights(1, {{make_site({1}), 0.8}, {make_site({-1}), 0.2}});
  const Eigen::MatrixXd s_drift = stationary_covariance(drift, fixed);
  BalanceOptions asym;
  asym.initial_factor = Eigen::MatrixXd(Eigen::LLT<Eigen::MatrixXd>(s_drift).matrixL());
  record("control: asymmetric kernel from its stationary law",
         detailed_balance_statistic(m_fixed, drift, fixed, u, replicas, derive_key(seed, 5), probes_fixed, asym), true);

  // The Lyapunov solver must reproduce Sigma on a symmetric kernel.
  const double lyap = (stationary_covariance(nn1, fixed) - m_fixed.covariance).cwiseAbs().maxCoeff();
  report.checks.push_back(make_check("stationary covariance solver = Sigma (symmetric kernel)", lyap <= 1e-9, lyap,
                                     1e-9, "<="));
  report.results = {{"cases", rows}, {"u", u}, {"replicas", replicas}};
  return report;
}

Report space_convergence(const Json& config) {
  const auto seed = param<std::uint64_t>(config, "seed", 20260101);
  const int dim = param<int>(config, "d", 3);
  const auto halves = param<std::vector<int>>(config, "box_halves", {2, 3, 4, 5, 6, 7, 8});
  const double window = param<double>(config, "window", 20.0);
  const int replicas = param<int>(config, "replicas", 1000);
  if (halves.size() < 3) throw Error(ErrorKind::SchemaError, "need at least three boxes");

  const Kernel k = Kernel::nearest_neighbor(dim);
  std::vector<Region> boxes;
  for (int h : halves) boxes.push_back(Region::cube(dim, -h, h));
  const std::size_t B = boxes.size();
  std::vector<Lattice> lattices;
  for (const Region& b : boxes) lattices.emplace_back(k, b);
  const Site anchors[] = {Site{}};
  const double t = 0.0;

  struct Row {
    NestedSample nested;
    std::vector<double> dual;  // independent per-box dual heights
  };
  const auto rows = map_replicas(replicas, [&](int r) {
    const std::uint64_t key = derive_key(seed, static_cast<std::uint64_t>(r));
    Row row;
    row.nested = coupled_nested_fields(k, boxes, {t - window, t}, anchors, derive_key(key, 0));
    const double lag[] = {window};
    for (std::size_t m = 0; m < B; ++m) {
      const EventStream ev = generate_events(k, boxes[m], {t - window, t}, derive_key(derive_key(key, 1), m));
      row.dual.push_back(flat_dual_profile(ev, lattices[m], *boxes[m].index_of(Site{}), t, lag).front());
    }
    return row;
  });

  Report report;
  report.oracle = "independent flat-start dual heights per box; exact conditional variances";
  double tele = 0.0;
  for (const Row& row : rows) tele = std::max(tele, row.nested.telescoping_error);
  report.checks.push_back(make_check("telescoping identity sum a^2 = b^2", tele <= 1e-12, tele, 1e-12, "<="));

  std::ostringstream csv;
  csv << "box_half,var_coupled,se_coupled,var_dual,se_dual,z,d_next,d_next_se\n";
  double worst_z = 0.0;
  Json per_box = Json::array();
  std::vector<double> dm;
  std::vector<Estimate> dm_est;
  for (std::size_t m = 0; m < B; ++m) {
    std::vector<double> xi, du;
    for (const Row& row : rows) {
      xi.push_back(row.nested.values[m][0]);
      du.push_back(row.dual[m]);
    }
    const Estimate ex = estimate(xi), ed = estimate(du);
    const double sx = variance_stderr(xi), sd = variance_stderr(du);
    const double z = std::abs(ex.variance - ed.variance) / std::sqrt(sx * sx + sd * sd);
    worst_z = std::max(worst_z, z);
    // Rao-Blackwell: E(xi^{m+1} - xi^m)^2 equals the mean gap of conditional variances.
    Estimate next{};
    if (m + 1 < B) {
      std::vector<double> gap;
      for (const Row& row : rows) {
        gap.push_back(row.nested.conditional_variance[m + 1][0] - row.nested.conditional_variance[m][0]);
      }
      next = estimate(gap);
      dm.push_back(next.mean);
      dm_est.push_back(next);
    }
    per_box.push_back({{"half", halves[m]}, {"var_coupled", ex.variance}, {"var_dual", ed.variance}, {"z", z}});
    csv << halves[m] << ',' << ex.variance << ',' << sx << ',' << ed.variance << ',' << sd << ',' << z << ','
        << next.mean << ',' << next.stderr_ << '\n';
  }
  report.data.emplace_back("nested.csv", csv.str());
  report.checks.push_back(make_check("Var(xi^m) vs independent dual variance (3 SE)", worst_z <= kSigmaBand, worst_z,
                                     kSigmaBand, "max |z| <=", {{"boxes", per_box}}));
  bool decreasing = true;
  for (std::size_t m = 0; m + 1 < dm.size(); ++m) decreasing = decreasing && dm[m + 1] <= dm[m];
  Json raw = Json::array();
  for (std::size_t m = 0; m + 1 < B; ++m) {
    std::vector<double> sq;
    for (const Row& row : rows) {
      const double d = row.nested.values[m + 1][0] - row.nested.values[m][0];
      sq.push_back(d * d);
    }
    raw.push_back(estimate(sq).mean);
  }
  report.checks.push_back(make_check("successive L2 differences decrease across boxes", decreasing, dm.back(),
                                     dm.front(), "nonincreasing", {{"rao_blackwell", dm}, {"direct", raw}}));
  report.results = {{"replicas", replicas}, {"window", window}, {"box_halves", halves}};
  return report;
}

}  // namespace harness::detail
