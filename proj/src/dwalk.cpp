#include "harness/dwalk.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "harness/error.hpp"
#include "harness/parallel.hpp"
#include "harness/rng.hpp"
#include "harness/stats.hpp"

namespace harness {

namespace {

bool is_zero(const Site& s) { return s == Site{}; }

RateTable to_table(const std::map<Site, double>& m) {
  RateTable out;
  for (const auto& [o, r] : m) {
    if (r > 0.0) out.emplace_back(o, r);
  }
  return out;
}

double nontrivial_rate(const RateTable& t) {
  double r = 0.0;
  for (const auto& [o, q] : t) {
    if (!is_zero(o)) r += q;
  }
  return r;
}

/// Poisson(lambda) pmf for k = 0..K, evaluated in log space.
std::vector<double> poisson_pmf(double lambda, std::size_t K) {
  std::vector<double> out(K + 1, 0.0);
  if (lambda <= 0.0) {
    out[0] = 1.0;
    return out;
  }
  const double ll = std::log(lambda);
  for (std::size_t k = 0; k <= K; ++k) {
    const double kk = static_cast<double>(k);
    out[k] = std::exp(-lambda + kk * ll - std::lgamma(kk + 1.0));
  }
  return out;
}

/// P(Poisson(lambda) > K).
double poisson_tail(double lambda, std::size_t K) {
  if (lambda <= 0.0) return 0.0;
  // Sum upward from K+1; terms decay geometrically once k > lambda.
  const double ll = std::log(lambda);
  double tail = 0.0;
  for (std::size_t k = K + 1;; ++k) {
    const double kk = static_cast<double>(k);
    const double term = std::exp(-lambda + kk * ll - std::lgamma(kk + 1.0));
    tail += term;
    if (kk > lambda && term < 1e-18 * std::max(tail, 1e-300)) break;
    if (kk > lambda + 50.0 * std::sqrt(lambda) + 200.0) break;
  }
  if (static_cast<double>(K) < lambda) {
    // Upper tail is large here; compute it as 1 - cdf to keep it accurate.
    double cdf = 0.0;
    for (std::size_t k = 0; k <= K; ++k) {
      const double kk = static_cast<double>(k);
      cdf += std::exp(-lambda + kk * ll - std::lgamma(kk + 1.0));
    }
    return std::max(0.0, 1.0 - cdf);
  }
  return tail;
}

void check_backend_radius(int radius) {
  if (radius < 0) throw Error(ErrorKind::TruncationTooSmall, "negative truncation radius");
}

}  // namespace

DWalkLaw make_dwalk_law(const Kernel& k) {
  validate_kernel(k);
  DWalkLaw law;
  law.base = k;
  std::map<Site, double> off, origin;
  for (const KernelEntry& e : k.weights) {
    if (e.p <= 0.0) continue;
    off[e.offset] += e.p;
    off[-e.offset] += e.p;
  }
  for (const KernelEntry& a : k.weights) {
    for (const KernelEntry& b : k.weights) {
      if (a.p <= 0.0 || b.p <= 0.0) continue;
      origin[b.offset - a.offset] += a.p * b.p;
    }
  }
  law.off_site = to_table(off);
  law.at_origin = to_table(origin);
  law.off_site_exit = nontrivial_rate(law.off_site);
  law.origin_exit = nontrivial_rate(law.at_origin);
  for (const auto& t : {&law.off_site, &law.at_origin}) {
    for (const auto& [o, q] : *t) law.reach = std::max(law.reach, max_norm(o));
  }
  return law;
}

const RateTable& d_jump_distribution(const DWalkLaw& law, const Site& state) {
  return is_zero(state) ? law.at_origin : law.off_site;
}

// ---------------------------------------------------------------------------
// Uniformization

UniformizedOccupancy::UniformizedOccupancy(const DWalkLaw& law, const Site& start,
                                           double horizon, UniformizationBackend options)
    : horizon_(horizon) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorKind::InvalidWindow, "horizon must be finite and >= 0");
  }
  check_backend_radius(options.radius);
  rate_ = std::max(law.off_site_exit, law.origin_exit);
  const int start_norm = max_norm(start);
  if (options.radius > 0) {
    if (start_norm > options.radius) {
      throw Error(ErrorKind::TruncationTooSmall, "start lies outside the truncation box");
    }
    radius_ = options.radius;
  } else {
    // Per-coordinate diffusivity of the faster regime sets the displacement scale.
    double diff = 0.0;
    for (int a = 0; a < law.base.dim; ++a) {
      double off = 0.0, org = 0.0;
      for (const auto& [o, q] : law.off_site) off += q * o[a] * o[a];
      for (const auto& [o, q] : law.at_origin) org += q * o[a] * o[a];
      diff = std::max({diff, off, org});
    }
    radius_ = static_cast<int>(std::ceil(7.0 * std::sqrt(diff * horizon))) + 2 * law.reach +
              start_norm;
  }
  for (;;) {
    run(law, start);
    const double bound = lost_mass() + tail_bound(rate_ * horizon_);
    if (bound <= options.tol) return;
    if (options.radius > 0) {
      throw Error(ErrorKind::TruncationTooSmall,
                  "leakage " + std::to_string(bound) + " exceeds tol at radius " +
                      std::to_string(radius_));
    }
    radius_ += radius_ / 2 + 1;
  }
}

double UniformizedOccupancy::tail_bound(double lambda) const { return poisson_tail(lambda, steps_); }

void UniformizedOccupancy::run(const DWalkLaw& law, const Site& start) {
  const int dim = law.base.dim;
  at_zero_.clear();
  lost_.clear();
  const double lambda = rate_ * horizon_;
  steps_ = static_cast<std::size_t>(std::ceil(lambda + 8.0 * std::sqrt(lambda) + 30.0));
  while (poisson_tail(lambda, steps_) > 1e-15) steps_ += static_cast<std::size_t>(std::sqrt(lambda) + 10.0);

  if (rate_ == 0.0) {
    at_zero_.assign(steps_ + 1, is_zero(start) ? 1.0 : 0.0);
    lost_.assign(steps_ + 1, 0.0);
    return;
  }

  // Dense padded box: interior [-R, R]^d plus a guard band one move wide.
  const int w = std::max(law.reach, 1);
  const int side = 2 * radius_ + 1 + 2 * w;
  std::vector<std::ptrdiff_t> stride(static_cast<std::size_t>(dim));
  std::size_t cells = 1;
  for (int a = dim - 1; a >= 0; --a) {
    stride[static_cast<std::size_t>(a)] = static_cast<std::ptrdiff_t>(cells);
    cells *= static_cast<std::size_t>(side);
  }
  auto linear = [&](const Site& s) {
    std::ptrdiff_t idx = 0;
    for (int a = 0; a < dim; ++a) idx += (s[a] + radius_ + w) * stride[static_cast<std::size_t>(a)];
    return idx;
  };
  auto offset_of = [&](const Site& o) {
    std::ptrdiff_t idx = 0;
    for (int a = 0; a < dim; ++a) idx += o[a] * stride[static_cast<std::size_t>(a)];
    return idx;
  };
  std::vector<std::uint8_t> interior(cells, 0);
  std::vector<std::size_t> guard;
  for (std::size_t c = 0; c < cells; ++c) {
    std::size_t rest = c;
    bool inside = true;
    for (int a = dim - 1; a >= 0; --a) {
      const int coord = static_cast<int>(rest % static_cast<std::size_t>(side));
      rest /= static_cast<std::size_t>(side);
      if (coord < w || coord >= side - w) inside = false;
    }
    interior[c] = inside ? 1 : 0;
    if (!inside) guard.push_back(c);
  }

  struct Move {
    std::ptrdiff_t shift;
    double prob;
  };
  std::vector<Move> off_moves, origin_moves;
  for (const auto& [o, q] : law.off_site) {
    if (!is_zero(o)) off_moves.push_back({offset_of(o), q / rate_});
  }
  for (const auto& [o, q] : law.at_origin) {
    if (!is_zero(o)) origin_moves.push_back({offset_of(o), q / rate_});
  }
  const double off_stay = 1.0 - law.off_site_exit / rate_;
  const double origin_stay = 1.0 - law.origin_exit / rate_;
  const auto zero_idx = static_cast<std::size_t>(linear(Site{}));

  std::vector<double> cur(cells, 0.0), next(cells, 0.0);
  cur[static_cast<std::size_t>(linear(start))] = 1.0;
  double lost = 0.0;
  at_zero_.push_back(cur[zero_idx]);
  lost_.push_back(0.0);
  for (std::size_t k = 0; k < steps_; ++k) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t c = 0; c < cells; ++c) {
      const double m = cur[c];
      if (m == 0.0 || !interior[c]) continue;
      const bool origin = c == zero_idx;
      next[c] += m * (origin ? origin_stay : off_stay);
      for (const Move& mv : origin ? origin_moves : off_moves) {
        next[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) + mv.shift)] += m * mv.prob;
      }
    }
    for (std::size_t g : guard) {
      lost += next[g];
      next[g] = 0.0;
    }
    cur.swap(next);
    at_zero_.push_back(cur[zero_idx]);
    lost_.push_back(lost);
  }
}

DWalkValue UniformizedOccupancy::probability(double u) const {
  if (!(u >= 0.0) || u > horizon_ * (1.0 + 1e-12)) {
    throw Error(ErrorKind::InvalidWindow, "u outside [0, horizon]");
  }
  const auto pmf = poisson_pmf(rate_ * u, steps_);
  DWalkValue out;
  out.radius = radius_;
  for (std::size_t k = 0; k <= steps_; ++k) {
    out.value += pmf[k] * at_zero_[k];
    out.error_bound += pmf[k] * lost_[k];
  }
  out.error_bound += poisson_tail(rate_ * u, steps_);
  return out;
}

DWalkValue UniformizedOccupancy::integral(double b) const {
  if (!(b >= 0.0) || b > horizon_ * (1.0 + 1e-12)) {
    throw Error(ErrorKind::InvalidWindow, "b outside [0, horizon]");
  }
  DWalkValue out;
  out.radius = radius_;
  if (rate_ == 0.0) {
    out.value = at_zero_.front() * b;
    return out;
  }
  // Integral of the k-th Poisson weight over [0, b] is P(Poisson(rate b) > k) / rate.
  const auto pmf = poisson_pmf(rate_ * b, steps_);
  double cdf = 0.0;
  for (std::size_t k = 0; k <= steps_; ++k) {
    cdf += pmf[k];
    const double above = std::max(0.0, 1.0 - cdf);
    out.value += above * at_zero_[k];
    out.error_bound += above * lost_[k];
  }
  out.value /= rate_;
  out.error_bound = out.error_bound / rate_ + b * poisson_tail(rate_ * b, steps_);
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo

OccupationSamples simulate_occupation(const DWalkLaw& law, const Site& start,
                                      std::span<const double> grid, int replicas,
                                      std::uint64_t seed) {
  if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()) || grid.front() < 0.0) {
    throw Error(ErrorKind::InvalidWindow, "time grid must be nondecreasing and >= 0");
  }
  if (replicas < 2) throw Error(ErrorKind::TooFewSamples, "need at least two chains");
  struct Table {
    std::vector<Site> moves;
    DiscreteSampler pick;
  };
  auto compile = [](const RateTable& t) {
    Table out;
    std::vector<double> w;
    for (const auto& [o, q] : t) {
      if (is_zero(o)) continue;
      out.moves.push_back(o);
      w.push_back(q);
    }
    if (!w.empty()) out.pick = DiscreteSampler(w);
    return out;
  };
  const Table off = compile(law.off_site);
  const Table origin = compile(law.at_origin);
  const double horizon = grid.back();

  struct Chain {
    std::vector<double> occ;
    std::vector<std::uint8_t> zero;
  };
  auto chains = map_replicas(replicas, [&](int r) {
    CounterRng rng(derive_key(seed, static_cast<std::uint64_t>(r)));
    Chain c;
    c.occ.resize(grid.size());
    c.zero.resize(grid.size());
    Site x = start;
    double t = 0.0, occ = 0.0;
    std::size_t g = 0;
    for (;;) {
      const bool home = is_zero(x);
      const double rate = home ? law.origin_exit : law.off_site_exit;
      const double next = rate > 0.0 ? t + rng.exponential() / rate : horizon + 1.0;
      while (g < grid.size() && grid[g] < next) {
        c.occ[g] = occ + (home ? grid[g] - t : 0.0);
        c.zero[g] = home ? 1 : 0;
        ++g;
      }
      if (g == grid.size()) break;
      if (home) occ += next - t;
      t = next;
      const Table& tab = home ? origin : off;
      x = x + tab.moves[static_cast<std::size_t>(tab.pick(rng.uniform()))];
    }
    return c;
  });
  OccupationSamples out;
  out.grid.assign(grid.begin(), grid.end());
  out.occupation.reserve(chains.size());
  out.at_zero.reserve(chains.size());
  for (auto& c : chains) {
    out.occupation.push_back(std::move(c.occ));
    out.at_zero.push_back(std::move(c.zero));
  }
  return out;
}

namespace {

DWalkValue from_samples(const std::vector<double>& xs) {
  const Estimate e = estimate(xs);
  DWalkValue v;
  v.value = e.mean;
  v.stderr_ = e.stderr_;
  v.samples = e.count;
  return v;
}

DWalkValue combine_difference(const DWalkValue& a, const DWalkValue& b, double scale) {
  DWalkValue v;
  v.value = scale * (a.value - b.value);
  v.stderr_ = scale * std::hypot(a.stderr_, b.stderr_);
  v.error_bound = scale * (a.error_bound + b.error_bound);
  v.samples = std::min(a.samples, b.samples);
  v.radius = std::max(a.radius, b.radius);
  return v;
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t j) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

void check_tail_range(double s, double s_max) {
  if (!(s > 0.0) || !(s < s_max)) throw Error(ErrorKind::InvalidWindow, "need 0 < s < sMax");
}

/// Per-replica integrals over [s_j, s_max] for each s_j of the grid.
std::vector<DWalkValue> mc_tails(const DWalkLaw& law, const Site& start,
                                 std::span<const double> s_grid, double s_max,
                                 const McBackend& mc) {
  std::vector<double> grid(s_grid.begin(), s_grid.end());
  grid.push_back(s_max);
  const auto samples = simulate_occupation(law, start, grid, mc.replicas, mc.seed);
  std::vector<DWalkValue> out;
  for (std::size_t j = 0; j < s_grid.size(); ++j) {
    std::vector<double> xs;
    xs.reserve(samples.occupation.size());
    for (const auto& row : samples.occupation) xs.push_back(row.back() - row[j]);
    out.push_back(from_samples(xs));
  }
  return out;
}

McBackend shifted(const McBackend& mc, std::uint64_t tag) {
  return {mc.replicas, derive_key(mc.seed, tag)};
}

}  // namespace

DWalkValue occupancy_probability(const DWalkLaw& law, const Site& i, double u,
                                 const DWalkBackend& backend) {
  if (!(u >= 0.0)) throw Error(ErrorKind::InvalidWindow, "u must be >= 0");
  if (u == 0.0) {
    DWalkValue v;
    v.value = is_zero(i) ? 1.0 : 0.0;
    return v;
  }
  if (const auto* unif = std::get_if<UniformizationBackend>(&backend)) {
    return UniformizedOccupancy(law, i, u, *unif).probability(u);
  }
  const auto& mc = std::get<McBackend>(backend);
  const double grid[] = {u};
  const auto samples = simulate_occupation(law, i, grid, mc.replicas, mc.seed);
  std::size_t hits = 0;
  for (const auto& z : samples.at_zero) hits += z[0];
  DWalkValue v;
  v.samples = samples.at_zero.size();
  v.value = static_cast<double>(hits) / static_cast<double>(v.samples);
  v.stderr_ = std::sqrt(v.value * (1.0 - v.value) / static_cast<double>(v.samples));
  return v;
}

DWalkValue window_variance(const DWalkLaw& law, double tau, const DWalkBackend& backend) {
  if (!(tau >= 0.0)) throw Error(ErrorKind::InvalidWindow, "tau must be >= 0");
  if (tau == 0.0) return {};
  if (const auto* unif = std::get_if<UniformizationBackend>(&backend)) {
    return UniformizedOccupancy(law, Site{}, tau, *unif).integral(tau);
  }
  const auto& mc = std::get<McBackend>(backend);
  const double grid[] = {tau};
  const auto samples = simulate_occupation(law, Site{}, grid, mc.replicas, mc.seed);
  return from_samples(column(samples.occupation, 0));
}

DWalkValue difference_variance(const DWalkLaw& law, const Site& i, double tau,
                               const DWalkBackend& backend) {
  if (!(tau >= 0.0)) throw Error(ErrorKind::InvalidWindow, "tau must be >= 0");
  if (is_zero(i) || tau == 0.0) return {};
  if (const auto* unif = std::get_if<UniformizationBackend>(&backend)) {
    const auto a = UniformizedOccupancy(law, Site{}, tau, *unif).integral(tau);
    const auto b = UniformizedOccupancy(law, i, tau, *unif).integral(tau);
    return combine_difference(a, b, 2.0);
  }
  const auto& mc = std::get<McBackend>(backend);
  const double grid[] = {tau};
  const auto a = simulate_occupation(law, Site{}, grid, mc.replicas, mc.seed);
  const auto b = simulate_occupation(law, i, grid, mc.replicas, derive_key(mc.seed, 1));
  return combine_difference(from_samples(column(a.occupation, 0)),
                            from_samples(column(b.occupation, 0)), 2.0);
}

std::vector<DWalkValue> residual_tail_profile(const DWalkLaw& law, std::span<const double> s_grid,
                                              double s_max, const DWalkBackend& backend) {
  for (double s : s_grid) check_tail_range(s, s_max);
  if (!std::is_sorted(s_grid.begin(), s_grid.end())) {
    throw Error(ErrorKind::InvalidWindow, "s grid must be increasing");
  }
  if (const auto* unif = std::get_if<UniformizationBackend>(&backend)) {
    const UniformizedOccupancy occ(law, Site{}, s_max, *unif);
    const DWalkValue full = occ.integral(s_max);
    std::vector<DWalkValue> out;
    for (double s : s_grid) {
      const DWalkValue part = occ.integral(s);
      out.push_back(combine_difference(full, part, 1.0));
    }
    return out;
  }
  return mc_tails(law, Site{}, s_grid, s_max, std::get<McBackend>(backend));
}

std::vector<DWalkValue> difference_residual_profile(const DWalkLaw& law, const Site& i,
                                                    std::span<const double> s_grid, double s_max,
                                                    const DWalkBackend& backend) {
  for (double s : s_grid) check_tail_range(s, s_max);
  if (!std::is_sorted(s_grid.begin(), s_grid.end())) {
    throw Error(ErrorKind::InvalidWindow, "s grid must be increasing");
  }
  std::vector<DWalkValue> out;
  if (is_zero(i)) return std::vector<DWalkValue>(s_grid.size());
  if (const auto* unif = std::get_if<UniformizationBackend>(&backend)) {
    const UniformizedOccupancy o0(law, Site{}, s_max, *unif);
    const UniformizedOccupancy oi(law, i, s_max, *unif);
    const DWalkValue f0 = o0.integral(s_max), fi = oi.integral(s_max);
    for (double s : s_grid) {
      const DWalkValue t0 = combine_difference(f0, o0.integral(s), 1.0);
      const DWalkValue ti = combine_difference(fi, oi.integral(s), 1.0);
      out.push_back(combine_difference(t0, ti, 2.0));
    }
    return out;
  }
  const auto& mc = std::get<McBackend>(backend);
  const auto a = mc_tails(law, Site{}, s_grid, s_max, mc);
  const auto b = mc_tails(law, i, s_grid, s_max, shifted(mc, 1));
  for (std::size_t j = 0; j < s_grid.size(); ++j) out.push_back(combine_difference(a[j], b[j], 2.0));
  return out;
}

DWalkValue residual_tail(const DWalkLaw& law, double s, double s_max, const DWalkBackend& backend) {
  const double grid[] = {s};
  return residual_tail_profile(law, grid, s_max, backend).front();
}

DWalkValue difference_residual_tail(const DWalkLaw& law, const Site& i, double s, double s_max,
                                    const DWalkBackend& backend) {
  const double grid[] = {s};
  return difference_residual_profile(law, i, grid, s_max, backend).front();
}

void write_occupancy_grid(std::ostream& out, const DWalkLaw& law, const Site& i,
                          std::span<const double> us, const DWalkBackend& backend) {
  out << "u,p_origin,p_site,ci\n";
  if (us.empty()) return;
  const double horizon = *std::max_element(us.begin(), us.end());
  if (const auto* unif = std::get_if<UniformizationBackend>(&backend)) {
    const UniformizedOccupancy o0(law, Site{}, horizon, *unif);
    const UniformizedOccupancy oi(law, i, horizon, *unif);
    for (double u : us) {
      const auto a = o0.probability(u), b = oi.probability(u);
      out << u << ',' << a.value << ',' << b.value << ',' << std::max(a.error_bound, b.error_bound)
          << '\n';
    }
    return;
  }
  for (double u : us) {
    const auto a = occupancy_probability(law, Site{}, u, backend);
    const auto b = occupancy_probability(law, i, u, backend);
    out << u << ',' << a.value << ',' << b.value << ','
        << 2.576 * std::max(a.stderr_, b.stderr_) << '\n';
  }
}

}  // namespace harness
