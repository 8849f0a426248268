#include "harness/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "harness/error.hpp"
#include "harness/rng.hpp"

namespace harness {

namespace {

std::string site_str(const Site& s, int dim) {
  std::string out = "(";
  for (int a = 0; a < dim; ++a) {
    if (a) out += ",";
    out += std::to_string(s[static_cast<std::size_t>(a)]);
  }
  return out + ")";
}

// Visits every site of the box in lexicographic order.
template <class F>
void for_each_in_box(const Box& box, int dim, F&& f) {
  Site s = box.lo;
  for (int a = dim; a < kMaxDim; ++a) s[static_cast<std::size_t>(a)] = 0;
  for (int a = 0; a < dim; ++a) {
    if (box.lo[static_cast<std::size_t>(a)] > box.hi[static_cast<std::size_t>(a)]) return;
  }
  while (true) {
    f(s);
    int a = dim - 1;
    while (a >= 0) {
      auto ua = static_cast<std::size_t>(a);
      if (++s[ua] <= box.hi[ua]) break;
      s[ua] = box.lo[ua];
      --a;
    }
    if (a < 0) return;
  }
}

}  // namespace

std::size_t SiteHash::operator()(const Site& s) const noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (int c : s) h = mix64(h ^ static_cast<std::uint32_t>(c));
  return static_cast<std::size_t>(h);
}

Site make_site(std::initializer_list<int> coords) {
  Site s{};
  std::size_t a = 0;
  for (int c : coords) {
    if (a >= s.size()) throw Error(ErrorKind::InvalidRegion, "too many coordinates");
    s[a++] = c;
  }
  return s;
}

Site operator+(const Site& a, const Site& b) {
  Site out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Site operator-(const Site& a, const Site& b) {
  Site out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Site operator-(const Site& a) { return Site{} - a; }

int max_norm(const Site& s) {
  int m = 0;
  for (int c : s) m = std::max(m, std::abs(c));
  return m;
}

std::string_view to_string(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::gaussian: return "gaussian";
    case NoiseLaw::uniform: return "uniform";
    case NoiseLaw::rademacher: return "rademacher";
  }
  return "gaussian";
}

NoiseLaw parse_noise_law(std::string_view name) {
  if (name == "gaussian") return NoiseLaw::gaussian;
  if (name == "uniform") return NoiseLaw::uniform;
  if (name == "rademacher") return NoiseLaw::rademacher;
  throw Error(ErrorKind::SchemaError, "unknown noise law '" + std::string(name) + "'");
}

double Kernel::weight(const Site& offset) const {
  double w = 0.0;
  for (const auto& e : weights) {
    if (e.offset == offset) w += e.p;
  }
  return w;
}

bool Kernel::is_symmetric(double tol) const {
  return std::all_of(weights.begin(), weights.end(), [&](const KernelEntry& e) {
    return std::abs(weight(e.offset) - weight(-e.offset)) <= tol;
  });
}

Kernel Kernel::from_weights(int dim, std::vector<KernelEntry> weights, NoiseLaw noise,
                            double sigma) {
  Kernel k;
  k.dim = dim;
  k.noise = noise;
  k.sigma = sigma;
  for (const auto& e : weights) {
    if (e.p > 0.0) k.range = std::max(k.range, max_norm(e.offset));
  }
  k.weights = std::move(weights);
  return k;
}

Kernel Kernel::nearest_neighbor(int dim, NoiseLaw noise, double sigma) {
  std::vector<KernelEntry> w;
  const double p = 1.0 / (2.0 * dim);
  for (int a = 0; a < dim; ++a) {
    for (int sgn : {-1, 1}) {
      Site o{};
      o[static_cast<std::size_t>(a)] = sgn;
      w.push_back({o, p});
    }
  }
  return from_weights(dim, std::move(w), noise, sigma);
}

void validate_kernel(const Kernel& k) {
  if (k.dim < 1 || k.dim > kMaxDim) {
    throw Error(ErrorKind::RangeViolation, "dimension " + std::to_string(k.dim) + " unsupported");
  }
  if (!(k.sigma >= 0.0) || !std::isfinite(k.sigma)) {
    throw Error(ErrorKind::NonStochastic, "noise scale must be finite and >= 0");
  }
  double total = 0.0;
  bool any_positive = false;
  for (const auto& e : k.weights) {
    if (!(e.p >= 0.0) || !std::isfinite(e.p)) {
      throw Error(ErrorKind::NonStochastic, "negative or non-finite weight at offset " +
                                                site_str(e.offset, k.dim));
    }
    for (int a = k.dim; a < kMaxDim; ++a) {
      if (e.offset[static_cast<std::size_t>(a)] != 0) {
        throw Error(ErrorKind::RangeViolation, "offset has coordinates beyond dimension");
      }
    }
    if (e.p > 0.0) {
      any_positive = true;
      if (max_norm(e.offset) > k.range) {
        throw Error(ErrorKind::RangeViolation, "offset " + site_str(e.offset, k.dim) +
                                                   " exceeds range " + std::to_string(k.range));
      }
    }
    total += e.p;
  }
  if (!any_positive) throw Error(ErrorKind::EmptySupport, "kernel has no positive weight");
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorKind::NonStochastic, "weights sum to " + std::to_string(total));
  }
}

bool Box::contains(const Site& s, int dim) const {
  for (int a = 0; a < dim; ++a) {
    auto ua = static_cast<std::size_t>(a);
    if (s[ua] < lo[ua] || s[ua] > hi[ua]) return false;
  }
  return true;
}

bool Box::contains(const Box& other, int dim) const {
  return contains(other.lo, dim) && contains(other.hi, dim);
}

std::size_t Box::volume(int dim) const {
  std::size_t v = 1;
  for (int a = 0; a < dim; ++a) {
    auto ua = static_cast<std::size_t>(a);
    if (hi[ua] < lo[ua]) return 0;
    v *= static_cast<std::size_t>(hi[ua] - lo[ua] + 1);
  }
  return v;
}

Box cube(int dim, int lo, int hi) {
  Box b;
  for (int a = 0; a < dim; ++a) {
    b.lo[static_cast<std::size_t>(a)] = lo;
    b.hi[static_cast<std::size_t>(a)] = hi;
  }
  return b;
}

Region::Region(int dim, Box box, std::vector<Site> excluded, std::vector<Site> pinned,
               BoundaryMode boundary)
    : dim_(dim), box_(box), boundary_(boundary), excluded_(std::move(excluded)) {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorKind::InvalidRegion, "unsupported dimension");
  for (int a = dim; a < kMaxDim; ++a) {
    box_.lo[static_cast<std::size_t>(a)] = 0;
    box_.hi[static_cast<std::size_t>(a)] = 0;
  }
  const std::size_t volume = box_.volume(dim);
  if (volume == 0) throw Error(ErrorKind::InvalidRegion, "empty box");
  lookup_.assign(volume, -1);
  std::vector<std::uint8_t> dropped(volume, 0);
  for (const Site& s : excluded_) {
    if (box_.contains(s, dim)) dropped[box_index(s)] = 1;
  }
  for_each_in_box(box_, dim, [&](const Site& s) {
    const std::size_t bi = box_index(s);
    if (dropped[bi]) return;
    lookup_[bi] = static_cast<int>(sites_.size());
    sites_.push_back(s);
  });
  if (sites_.empty()) throw Error(ErrorKind::InvalidRegion, "carrier is empty");
  pinned_mask_.assign(sites_.size(), 0);
  for (const Site& s : pinned) {
    auto idx = index_of(s);
    if (!idx) throw Error(ErrorKind::InvalidRegion, "pinned site " + site_str(s, dim) + " outside carrier");
    if (!pinned_mask_[static_cast<std::size_t>(*idx)]) {
      pinned_mask_[static_cast<std::size_t>(*idx)] = 1;
      pinned_.push_back(*idx);
    }
  }
  std::sort(pinned_.begin(), pinned_.end());
  if (boundary_ == BoundaryMode::free) gamma_default_.reset();
}

Region Region::cube(int dim, int lo, int hi, BoundaryMode boundary) {
  return Region(dim, harness::cube(dim, lo, hi), {}, {}, boundary);
}

std::size_t Region::box_index(const Site& s) const {
  std::size_t idx = 0;
  for (int a = 0; a < dim_; ++a) {
    auto ua = static_cast<std::size_t>(a);
    idx = idx * static_cast<std::size_t>(box_.hi[ua] - box_.lo[ua] + 1) +
          static_cast<std::size_t>(s[ua] - box_.lo[ua]);
  }
  return idx;
}

std::optional<int> Region::index_of(const Site& s) const {
  for (int a = dim_; a < kMaxDim; ++a) {
    if (s[static_cast<std::size_t>(a)] != 0) return std::nullopt;
  }
  if (!box_.contains(s, dim_)) return std::nullopt;
  const int idx = lookup_[box_index(s)];
  if (idx < 0) return std::nullopt;
  return idx;
}

Region Region::with_pinned(std::vector<Site> pinned) const {
  Region r(dim_, box_, excluded_, std::move(pinned), boundary_);
  r.gamma_default_ = gamma_default_;
  r.gamma_entries_ = gamma_entries_;
  r.gamma_map_ = gamma_map_;
  return r;
}

std::optional<double> Region::gamma(const Site& s) const {
  if (boundary_ == BoundaryMode::free) return std::nullopt;
  if (auto it = gamma_map_.find(s); it != gamma_map_.end()) return it->second;
  return gamma_default_;
}

void Region::set_gamma(std::vector<std::pair<Site, double>> entries) {
  if (boundary_ == BoundaryMode::free && !entries.empty()) {
    throw Error(ErrorKind::InvalidRegion, "free boundary takes no gamma");
  }
  gamma_map_.clear();
  for (const auto& [s, v] : entries) {
    if (contains(s)) throw Error(ErrorKind::InvalidRegion, "gamma site " + site_str(s, dim_) + " inside carrier");
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidRegion, "non-finite gamma value");
    gamma_map_[s] = v;
  }
  gamma_entries_ = std::move(entries);
  gamma_default_.reset();
}

void Region::fill_gamma(const Kernel& k, const std::function<double(const Site&)>& value) {
  std::vector<std::pair<Site, double>> entries;
  for (const Site& s : shell(k.range)) entries.emplace_back(s, value(s));
  set_gamma(std::move(entries));
}

std::vector<Site> Region::shell(int range) const {
  Box grown = box_;
  for (int a = 0; a < dim_; ++a) {
    grown.lo[static_cast<std::size_t>(a)] -= range;
    grown.hi[static_cast<std::size_t>(a)] += range;
  }
  std::vector<Site> out;
  for_each_in_box(grown, dim_, [&](const Site& s) {
    if (contains(s)) return;
    // Within max-norm `range` of some carrier site.
    Box near;
    for (int a = 0; a < dim_; ++a) {
      near.lo[static_cast<std::size_t>(a)] = s[static_cast<std::size_t>(a)] - range;
      near.hi[static_cast<std::size_t>(a)] = s[static_cast<std::size_t>(a)] + range;
    }
    bool hit = false;
    for_each_in_box(near, dim_, [&](const Site& t) { hit = hit || contains(t); });
    if (hit) out.push_back(s);
  });
  return out;
}

std::uint64_t Region::fingerprint() const {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(dim_) + 0x1234);
  for (int a = 0; a < dim_; ++a) {
    h = mix64(h ^ static_cast<std::uint32_t>(box_.lo[static_cast<std::size_t>(a)]));
    h = mix64(h ^ static_cast<std::uint32_t>(box_.hi[static_cast<std::size_t>(a)]));
  }
  std::vector<Site> ex = excluded_;
  std::sort(ex.begin(), ex.end());
  for (const Site& s : ex) {
    if (!box_.contains(s, dim_)) continue;
    h = mix64(h ^ SiteHash{}(s));
  }
  return h;
}

HeightField flat_field(const Region& region, double value) {
  return HeightField{std::vector<double>(region.size(), value)};
}

HeightField field_from(const Region& region, const std::function<double(const Site&)>& f) {
  HeightField h;
  h.values.reserve(region.size());
  for (const Site& s : region.sites()) h.values.push_back(f(s));
  return h;
}

SiteWeights free_site_kernel(const Kernel& k, const Region& region, const Site& site) {
  if (!region.contains(site)) throw Error(ErrorKind::InvalidRegion, "site outside carrier");
  SiteWeights out;
  double mass = 0.0;
  for (const auto& e : k.weights) {
    if (e.p <= 0.0) continue;
    const Site target = site + e.offset;
    if (!region.contains(target)) continue;
    mass += e.p;
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& w) { return w.first == target; });
    if (it == out.end()) {
      out.emplace_back(target, e.p);
    } else {
      it->second += e.p;
    }
  }
  if (mass <= 0.0) {
    throw Error(ErrorKind::ZeroInteriorMass, "no kernel mass inside the carrier from " + site_str(site, k.dim));
  }
  for (auto& w : out) w.second /= mass;
  return out;
}

double p_average(const Kernel& k, const HeightField& field, const Region& region,
                 const Site& site) {
  auto idx = region.index_of(site);
  if (!idx) throw Error(ErrorKind::InvalidRegion, "site " + site_str(site, k.dim) + " outside carrier");
  if (field.size() != region.size()) throw Error(ErrorKind::InitialMismatch, "field size differs from carrier");
  auto height = [&](const Site& s) -> double {
    auto j = region.index_of(s);
    if (j) return region.is_pinned(*j) ? 0.0 : field[static_cast<std::size_t>(*j)];
    auto g = region.gamma(s);
    if (!g) throw Error(ErrorKind::MissingBoundary, "no gamma at " + site_str(s, k.dim));
    return *g;
  };
  double acc = 0.0;
  if (region.boundary() == BoundaryMode::free) {
    for (const auto& [target, w] : free_site_kernel(k, region, site)) acc += w * height(target);
    return acc;
  }
  for (const auto& e : k.weights) {
    if (e.p > 0.0) acc += e.p * height(site + e.offset);
  }
  return acc;
}

bool is_harmonic(const Kernel& k, const HeightField& h, const Region& region, double tol) {
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region.is_pinned(static_cast<int>(i))) continue;
    const Site& s = region.sites()[i];
    if (std::abs(p_average(k, h, region, s) - h[i]) > tol) return false;
  }
  return true;
}

Lattice::Lattice(Kernel kernel, Region region)
    : kernel_(std::move(kernel)), region_(std::move(region)) {
  validate_kernel(kernel_);
  if (kernel_.dim != region_.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "kernel and region dimensions differ");
  }
  const bool free_mode = region_.boundary() == BoundaryMode::free;
  std::unordered_map<Site, int, SiteHash> exterior_index;
  if (!free_mode) {
    exterior_ = region_.shell(kernel_.range);
    exterior_values_.reserve(exterior_.size());
    for (std::size_t e = 0; e < exterior_.size(); ++e) {
      exterior_index[exterior_[e]] = static_cast<int>(e);
      auto g = region_.gamma(exterior_[e]);
      exterior_values_.push_back(g ? *g : std::numeric_limits<double>::quiet_NaN());
    }
  }
  const std::size_t n = region_.size();
  row_begin_.reserve(n + 1);
  row_valid_.assign(n, 1);
  row_begin_.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    const Site& s = region_.sites()[i];
    const std::size_t first = links_.size();
    double interior = 0.0;
    for (const auto& e : kernel_.weights) {
      if (e.p <= 0.0) continue;
      const Site t = s + e.offset;
      if (auto j = region_.index_of(t)) {
        links_.push_back({*j, e.p});
        interior += e.p;
      } else if (!free_mode) {
        const int ext = exterior_index.at(t);
        links_.push_back({~ext, e.p});
        if (std::isnan(exterior_values_[static_cast<std::size_t>(ext)])) row_valid_[i] = 0;
      }
    }
    if (free_mode) {
      if (interior <= 0.0) {
        row_valid_[i] = 0;
      } else {
        for (std::size_t l = first; l < links_.size(); ++l) links_[l].p /= interior;
      }
    }
    row_begin_.push_back(links_.size());
  }
}

void Lattice::require_updatable() const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (row_valid_[i] || region_.is_pinned(static_cast<int>(i))) continue;
    if (region_.boundary() == BoundaryMode::free) {
      throw Error(ErrorKind::ZeroInteriorMass, "site " + site_str(region_.sites()[i], region_.dim()) +
                                                   " has no interior kernel mass");
    }
    throw Error(ErrorKind::MissingBoundary, "site " + site_str(region_.sites()[i], region_.dim()) +
                                                " jumps to an exterior site without gamma");
  }
}

}  // namespace harness
