#include "harness/gibbs.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "harness/dual.hpp"
#include "harness/engine.hpp"
#include "harness/error.hpp"
#include "harness/parallel.hpp"
#include "harness/rng.hpp"

namespace harness {

Eigen::VectorXd GibbsModel::restrict(const HeightField& field) const {
  if (field.size() != region.size()) throw Error(ErrorKind::DimensionMismatch, "field is not on the model carrier");
  Eigen::VectorXd x(static_cast<Eigen::Index>(free_sites.size()));
  for (std::size_t a = 0; a < free_sites.size(); ++a) {
    x[static_cast<Eigen::Index>(a)] = field[static_cast<std::size_t>(free_sites[a])];
  }
  return x;
}

HeightField GibbsModel::embed(const Eigen::VectorXd& values) const {
  HeightField h = flat_field(region);
  for (std::size_t a = 0; a < free_sites.size(); ++a) {
    h[static_cast<std::size_t>(free_sites[a])] = values[static_cast<Eigen::Index>(a)];
  }
  return h;
}

Eigen::MatrixXd restricted_transition(const Kernel& k, const Region& region,
                                      std::vector<int>* free_sites) {
  const Lattice lattice(k, region);
  std::vector<int> index(region.size(), -1);
  std::vector<int> sites;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region.is_pinned(static_cast<int>(i))) {
      index[i] = static_cast<int>(sites.size());
      sites.push_back(static_cast<int>(i));
    }
  }
  const auto n = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (const Link& l : lattice.links(sites[static_cast<std::size_t>(a)])) {
      if (l.target < 0) continue;
      const int b = index[static_cast<std::size_t>(l.target)];
      if (b >= 0) P(a, b) += l.p;
    }
  }
  if (free_sites) *free_sites = std::move(sites);
  return P;
}

GibbsModel build_model(const Kernel& k, const Region& region) {
  validate_kernel(k);
  if (!k.is_symmetric()) throw Error(ErrorKind::AsymmetricKernel, "Gibbs models need p(0,o) = p(0,-o)");
  if (k.self_mass() != 0.0) throw Error(ErrorKind::SelfLoopKernel, "Gibbs models need p(0,0) = 0");
  if (k.dim != region.dim()) throw Error(ErrorKind::DimensionMismatch, "kernel and region dimensions differ");
  if (region.boundary() == BoundaryMode::free && region.pinned_indices().empty()) {
    throw Error(ErrorKind::NoEscape, "free boundary without a pinned site has no absorption");
  }
  for (const auto& [s, v] : region.gamma_entries()) {
    if (v != 0.0) throw Error(ErrorKind::InvalidRegion, "Gibbs models use the flat zero boundary");
  }
  GibbsModel m{k, region, {}, {}, {}, {}, {}};
  const Eigen::MatrixXd P = restricted_transition(k, region, &m.free_sites);
  if (m.free_sites.empty()) throw Error(ErrorKind::InvalidRegion, "no free sites");
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    // Renormalised free-boundary rows lose symmetry unless every site keeps the same interior mass.
    throw Error(ErrorKind::AsymmetricKernel, "restricted kernel is not symmetric on this carrier");
  }
  m.free_index.assign(region.size(), -1);
  for (std::size_t a = 0; a < m.free_sites.size(); ++a) {
    m.free_index[static_cast<std::size_t>(m.free_sites[a])] = static_cast<int>(a);
  }
  const auto n = P.rows();
  m.precision = Eigen::MatrixXd::Identity(n, n) - P;
  const Eigen::LLT<Eigen::MatrixXd> llt(m.precision);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
    throw Error(ErrorKind::NoEscape, "precision matrix is singular");
  }
  m.covariance = llt.solve(Eigen::MatrixXd::Identity(n, n));
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose());
  m.factor = Eigen::LLT<Eigen::MatrixXd>(m.covariance).matrixL();
  return m;
}

double green_entry(const Kernel& k, const Region& region, const Site& i, const Site& j) {
  const Lattice lattice(k, region);
  std::vector<int> index(region.size(), -1);
  int n = 0;
  for (std::size_t s = 0; s < region.size(); ++s) {
    if (!region.is_pinned(static_cast<int>(s))) index[s] = n++;
  }
  auto free_of = [&](const Site& s) {
    const auto idx = region.index_of(s);
    if (!idx || index[static_cast<std::size_t>(*idx)] < 0) {
      throw Error(ErrorKind::AnchorOutsideCarrier, "site is not a free carrier site");
    }
    return index[static_cast<std::size_t>(*idx)];
  };
  const int a = free_of(i), b = free_of(j);
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t s = 0; s < region.size(); ++s) {
    const int row = index[s];
    if (row < 0) continue;
    entries.emplace_back(row, row, 1.0);
    for (const Link& l : lattice.links(static_cast<int>(s))) {
      if (l.target < 0) continue;
      const int col = index[static_cast<std::size_t>(l.target)];
      if (col >= 0) entries.emplace_back(row, col, -l.p);
    }
  }
  Eigen::SparseMatrix<double> Q(n, n);
  Q.setFromTriplets(entries.begin(), entries.end());
  // Row j of (I - P)^{-1} solves the transposed system.
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(Q.transpose());
  if (lu.info() != Eigen::Success) throw Error(ErrorKind::NoEscape, "walk is never absorbed");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[a] = 1.0;
  const Eigen::VectorXd row = lu.solve(rhs);
  return row[b];
}

double log_density(const GibbsModel& model, std::span<const double> free_values) {
  if (free_values.size() != model.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(model.dim()) + " free values");
  }
  const Eigen::Map<const Eigen::VectorXd> x(free_values.data(), static_cast<Eigen::Index>(free_values.size()));
  return -0.5 * x.dot(model.precision * x);
}

double log_density(const GibbsModel& model, const HeightField& field) {
  const Eigen::VectorXd x = model.restrict(field);
  return log_density(model, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

HeightField sample_with(const GibbsModel& model, const Eigen::MatrixXd& factor, std::uint64_t key) {
  CounterRng rng(key);
  Eigen::VectorXd z(factor.cols());
  for (Eigen::Index a = 0; a < z.size(); ++a) z[a] = rng.gaussian();
  return model.embed(factor * z);
}

std::vector<HeightField> sample_field(const GibbsModel& model, int n, std::uint64_t seed) {
  return map_replicas(n, [&](int r) {
    return sample_with(model, model.factor, derive_key(seed, static_cast<std::uint64_t>(r)));
  });
}

SiteWeights conditional_mean_weights(const GibbsModel& model, const Site& site) {
  const auto idx = model.region.index_of(site);
  if (!idx || model.free_index[static_cast<std::size_t>(*idx)] < 0) {
    throw Error(ErrorKind::AnchorOutsideCarrier, "site is not a free site of the model");
  }
  const auto a = static_cast<Eigen::Index>(model.free_index[static_cast<std::size_t>(*idx)]);
  const double diag = model.precision(a, a);
  SiteWeights out;
  for (Eigen::Index b = 0; b < model.precision.cols(); ++b) {
    if (b == a || model.precision(a, b) == 0.0) continue;
    const auto site_b = model.region.sites()[static_cast<std::size_t>(model.free_sites[static_cast<std::size_t>(b)])];
    out.emplace_back(site_b, -model.precision(a, b) / diag);
  }
  return out;
}

Eigen::MatrixXd stationary_covariance(const Kernel& k, const Region& region) {
  const Eigen::MatrixXd P = restricted_transition(k, region);
  const auto n = P.rows();
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - P;
  // Unknowns: the upper triangle of S.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) pairs.emplace_back(a, b);
  }
  const auto N = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd M(N, N);
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index c = 0; c < N; ++c) {
    const auto [p, q] = pairs[static_cast<std::size_t>(c)];
    E.setZero();
    E(p, q) = 1.0;
    E(q, p) = 1.0;
    Eigen::MatrixXd L = A * E + E * A.transpose();
    const Eigen::MatrixXd AEA = A * E * A.transpose();
    for (Eigen::Index a = 0; a < n; ++a) L(a, a) -= AEA(a, a);
    for (Eigen::Index r = 0; r < N; ++r) {
      const auto [a, b] = pairs[static_cast<std::size_t>(r)];
      M(r, c) = L(a, b);
    }
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    if (pairs[static_cast<std::size_t>(r)].first == pairs[static_cast<std::size_t>(r)].second) {
      rhs[r] = k.sigma * k.sigma;
    }
  }
  const Eigen::VectorXd s = M.fullPivLu().solve(rhs);
  Eigen::MatrixXd S(n, n);
  for (Eigen::Index c = 0; c < N; ++c) {
    const auto [p, q] = pairs[static_cast<std::size_t>(c)];
    S(p, q) = s[c];
    S(q, p) = s[c];
  }
  return S;
}

std::vector<Probe> default_probes(const GibbsModel& model, int sites) {
  const int n = static_cast<int>(model.dim());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return model.covariance(a, a) < model.covariance(b, b);
  });
  // Spread picks over the variance ranking, low to high.
  const int m = std::min(sites, n);
  std::vector<int> chosen;
  for (int c = 0; c < m; ++c) {
    const int pos = m == 1 ? n - 1 : c * (n - 1) / (m - 1);
    chosen.push_back(order[static_cast<std::size_t>(pos)]);
  }
  std::sort(chosen.begin(), chosen.end());
  chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
  std::vector<Probe> probes;
  for (int a : chosen) probes.push_back({a, -1});
  for (int a : chosen) probes.push_back({a, a});
  for (std::size_t c = 0; c + 1 < chosen.size(); ++c) probes.push_back({chosen[c], chosen[c + 1]});
  if (chosen.size() > 2) probes.push_back({chosen.front(), chosen.back()});
  return probes;
}

BalanceResult detailed_balance_statistic(const GibbsModel& model, const Kernel& k,
                                         const Region& region, double u, int replicas,
                                         std::uint64_t seed, std::span<const Probe> probes,
                                         const BalanceOptions& options) {
  if (!(u >= 0.0)) throw Error(ErrorKind::InvalidWindow, "u must be >= 0");
  if (replicas < 2) throw Error(ErrorKind::TooFewSamples, "need at least two replicas");
  if (region.fingerprint() != model.region.fingerprint()) {
    throw Error(ErrorKind::DimensionMismatch, "region differs from the model's carrier");
  }
  const Lattice lattice(k, region);
  const Eigen::MatrixXd& factor = options.initial_factor ? *options.initial_factor : model.factor;
  const std::size_t np = probes.size();

  // Per replica: probe values at time 0 followed by probe values at time u.
  const auto rows = map_replicas(replicas, [&](int r) {
    const std::uint64_t key = derive_key(seed, static_cast<std::uint64_t>(r));
    HeightField h = sample_with(model, factor, derive_key(key, 0));
    const Eigen::VectorXd x0 = model.restrict(h);
    const EventStream events = generate_events(k, region, {0.0, u}, derive_key(key, 1));
    if (options.dynamics == BalanceDynamics::shift) {
      h = evolve_seen_from_origin(events, lattice, h).final;
    } else {
      advance(events, lattice, h.values, Dynamics::standard, u);
    }
    const Eigen::VectorXd xu = model.restrict(h);
    std::vector<double> v(2 * np);
    for (std::size_t p = 0; p < np; ++p) {
      v[p] = probes[p](x0);
      v[np + p] = probes[p](xu);
    }
    return v;
  });

  BalanceResult out;
  out.replicas = replicas;
  out.non_gaussian_noise = k.noise != NoiseLaw::gaussian;
  const double n = static_cast<double>(replicas);
  for (std::size_t f = 0; f < np; ++f) {
    for (std::size_t g = f + 1; g < np; ++g) {
      double sum = 0.0, sq = 0.0;
      for (const auto& v : rows) {
        const double d = v[f] * v[np + g] - v[g] * v[np + f];
        sum += d;
        sq += d * d;
      }
      const double mean = sum / n;
      const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
      const double se = std::sqrt(var / n);
      const double z = se > 0.0 ? std::abs(mean) / se : 0.0;
      if (z > out.statistic || out.worst_f < 0) {
        out.statistic = z;
        out.worst_f = static_cast<int>(f);
        out.worst_g = static_cast<int>(g);
        out.worst_mean = mean;
      }
    }
  }
  return out;
}

NestedSample coupled_nested_fields(const Kernel& k, std::span<const Region> boxes,
                                   TimeWindow window, std::span<const Site> anchors,
                                   std::uint64_t seed) {
  if (boxes.empty()) throw Error(ErrorKind::NonNestedBoxes, "no boxes given");
  const Region& outer = boxes.back();
  for (std::size_t m = 0; m + 1 < boxes.size(); ++m) {
    if (boxes[m].dim() != outer.dim() || !boxes[m + 1].box().contains(boxes[m].box(), outer.dim())) {
      throw Error(ErrorKind::NonNestedBoxes, "boxes must be nested, innermost first");
    }
  }
  const EventStream big = generate_events(k, outer, window, seed);
  const std::size_t n_events = big.events.size();
  std::vector<EventStream> streams;
  std::vector<Lattice> lattices;
  for (std::size_t m = 0; m < boxes.size(); ++m) {
    streams.push_back(m + 1 == boxes.size() ? big : restrict_stream(big, outer, boxes[m]));
    lattices.emplace_back(k, boxes[m]);
  }
  const std::uint64_t z_key = derive_key(seed, 0x6e65737465640000ULL);
  auto gaussian = [&](std::size_t level, std::size_t event) {
    return CounterRng(derive_key(derive_key(z_key, level), event)).gaussian();
  };

  NestedSample out;
  out.values.assign(boxes.size(), std::vector<double>(anchors.size(), 0.0));
  out.conditional_variance.assign(boxes.size(), std::vector<double>(anchors.size(), 0.0));
  std::vector<double> prev_b2(n_events), tele(n_events), W(n_events), b(n_events);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    std::fill(prev_b2.begin(), prev_b2.end(), 0.0);
    std::fill(tele.begin(), tele.end(), 0.0);
    std::fill(W.begin(), W.end(), 0.0);
    for (std::size_t m = 0; m < boxes.size(); ++m) {
      const auto idx = boxes[m].index_of(anchors[a]);
      if (!idx) throw Error(ErrorKind::AnchorOutsideCarrier, "anchor outside an inner box");
      std::fill(b.begin(), b.end(), 0.0);
      const EventStream& st = streams[m];
      const bool restricted = m + 1 != boxes.size();
      scan_epoch_weights(st, lattices[m], *idx, window.end, window.start,
                         [&](std::int32_t id, double w) {
                           const auto src = restricted ? st.source_ids[static_cast<std::size_t>(id)] : id;
                           b[static_cast<std::size_t>(src)] = w;
                         });
      double field = 0.0, cond = 0.0;
      for (std::size_t e = 0; e < n_events; ++e) {
        const double b2 = b[e] * b[e];
        if (b2 == 0.0 && prev_b2[e] == 0.0) continue;
        const double d = b2 - prev_b2[e];
        if (d < -1e-12) {
          throw Error(ErrorKind::NegativeRadicand, "weights shrank when the box grew");
        }
        const double inc = std::sqrt(std::max(d, 0.0));
        if (inc > 0.0) W[e] += inc * gaussian(m, e);
        tele[e] += inc * inc;
        out.telescoping_error = std::max(out.telescoping_error, std::abs(tele[e] - b2));
        prev_b2[e] = b2;
        field += W[e];
        cond += b2;
      }
      out.values[m][a] = k.sigma * field;
      out.conditional_variance[m][a] = k.sigma * k.sigma * cond;
    }
  }
  return out;
}

}  // namespace harness
