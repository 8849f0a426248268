#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace harness {

inline constexpr int kMaxDim = 4;

/// Lattice point of Z^d. Coordinates beyond the working dimension stay 0.
using Site = std::array<int, kMaxDim>;

struct SiteHash {
  std::size_t operator()(const Site& s) const noexcept;
};

Site make_site(std::initializer_list<int> coords);
Site operator+(const Site& a, const Site& b);
Site operator-(const Site& a, const Site& b);
Site operator-(const Site& a);
int max_norm(const Site& s);

enum class NoiseLaw { gaussian, uniform, rademacher };

std::string_view to_string(NoiseLaw law);
NoiseLaw parse_noise_law(std::string_view name);

struct KernelEntry {
  Site offset{};
  double p = 0.0;
};

/// Translation-invariant jump law p(0, .) together with the update noise.
struct Kernel {
  int dim = 1;
  std::vector<KernelEntry> weights;
  int range = 0;
  NoiseLaw noise = NoiseLaw::gaussian;
  double sigma = 1.0;

  double weight(const Site& offset) const;
  double self_mass() const { return weight(Site{}); }
  bool is_symmetric(double tol = 1e-12) const;

  /// Builds a kernel whose range is the largest max-norm among positive weights.
  static Kernel from_weights(int dim, std::vector<KernelEntry> weights,
                             NoiseLaw noise = NoiseLaw::gaussian, double sigma = 1.0);
  /// Uniform law on the 2d unit vectors.
  static Kernel nearest_neighbor(int dim, NoiseLaw noise = NoiseLaw::gaussian,
                                 double sigma = 1.0);
};

/// Throws NonStochastic, RangeViolation or EmptySupport.
void validate_kernel(const Kernel& k);

enum class BoundaryMode { fixed_gamma, free };

struct Box {
  Site lo{};
  Site hi{};

  bool contains(const Site& s, int dim) const;
  bool contains(const Box& other, int dim) const;
  std::size_t volume(int dim) const;
};

Box cube(int dim, int lo, int hi);

/// Finite simulation domain: a box minus exclusions, with pinned sites held at 0
/// and, in fixed mode, boundary heights on the exterior shell.
class Region {
 public:
  Region(int dim, Box box, std::vector<Site> excluded = {}, std::vector<Site> pinned = {},
         BoundaryMode boundary = BoundaryMode::fixed_gamma);

  static Region cube(int dim, int lo, int hi, BoundaryMode boundary = BoundaryMode::fixed_gamma);

  int dim() const { return dim_; }
  const Box& box() const { return box_; }
  BoundaryMode boundary() const { return boundary_; }
  std::span<const Site> sites() const { return sites_; }
  std::size_t size() const { return sites_.size(); }
  std::span<const Site> excluded() const { return excluded_; }

  std::optional<int> index_of(const Site& s) const;
  bool contains(const Site& s) const { return index_of(s).has_value(); }

  bool is_pinned(int index) const { return pinned_mask_[static_cast<std::size_t>(index)] != 0; }
  std::span<const int> pinned_indices() const { return pinned_; }
  Region with_pinned(std::vector<Site> pinned) const;

  /// Exterior height lookup. Returns nullopt when the site is uncovered.
  std::optional<double> gamma(const Site& s) const;
  bool has_explicit_gamma() const { return !gamma_default_.has_value(); }
  std::span<const std::pair<Site, double>> gamma_entries() const { return gamma_entries_; }

  /// Replaces the flat default by explicit entries; only shell sites listed are covered.
  void set_gamma(std::vector<std::pair<Site, double>> entries);
  /// Sets gamma on every exterior site within one jump of the carrier.
  void fill_gamma(const Kernel& k, const std::function<double(const Site&)>& value);

  /// Exterior sites within max-norm `range` of the carrier, in lexicographic order.
  std::vector<Site> shell(int range) const;

  /// Hash of the carrier geometry (dimension, box, exclusions).
  std::uint64_t fingerprint() const;

 private:
  std::size_t box_index(const Site& s) const;

  int dim_;
  Box box_;
  BoundaryMode boundary_;
  std::vector<Site> excluded_;
  std::vector<Site> sites_;
  std::vector<int> lookup_;  // box linear index -> carrier index or -1
  std::vector<int> pinned_;
  std::vector<std::uint8_t> pinned_mask_;
  std::optional<double> gamma_default_ = 0.0;
  std::vector<std::pair<Site, double>> gamma_entries_;
  std::unordered_map<Site, double, SiteHash> gamma_map_;
};

/// Heights on the carrier, stored in the region's site order.
struct HeightField {
  std::vector<double> values;

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }
};

HeightField flat_field(const Region& region, double value = 0.0);
HeightField field_from(const Region& region, const std::function<double(const Site&)>& f);

using SiteWeights = std::vector<std::pair<Site, double>>;

/// Renormalised jump law restricted to the carrier (free boundary).
SiteWeights free_site_kernel(const Kernel& k, const Region& region, const Site& site);

/// Kernel average of the juxtaposed configuration at `site`.
double p_average(const Kernel& k, const HeightField& field, const Region& region,
                 const Site& site);

bool is_harmonic(const Kernel& k, const HeightField& h, const Region& region,
                 double tol = 1e-9);

/// One outgoing kernel link. target >= 0 is a carrier index; otherwise the
/// exterior shell index is ~target.
struct Link {
  int target;
  double p;
};

/// Kernel compiled against a region: per-site link tables for the hot loops.
class Lattice {
 public:
  Lattice(Kernel kernel, Region region);

  const Kernel& kernel() const { return kernel_; }
  const Region& region() const { return region_; }
  std::size_t size() const { return region_.size(); }

  std::span<const Link> links(int site) const {
    return {links_.data() + row_begin_[static_cast<std::size_t>(site)],
            links_.data() + row_begin_[static_cast<std::size_t>(site) + 1]};
  }

  std::span<const Site> exterior_sites() const { return exterior_; }
  /// NaN marks an exterior site without a gamma value.
  std::span<const double> exterior_values() const { return exterior_values_; }
  bool is_pinned(int site) const { return region_.is_pinned(site); }
  bool row_valid(int site) const { return row_valid_[static_cast<std::size_t>(site)] != 0; }

  /// Throws MissingBoundary / ZeroInteriorMass if any non-pinned site cannot be updated.
  void require_updatable() const;

  double average(int site, std::span<const double> values) const {
    double acc = 0.0;
    for (const Link& l : links(site)) {
      acc += l.p * (l.target >= 0 ? values[static_cast<std::size_t>(l.target)]
                                  : exterior_values_[static_cast<std::size_t>(~l.target)]);
    }
    return acc;
  }

 private:
  Kernel kernel_;
  Region region_;
  std::vector<std::size_t> row_begin_;
  std::vector<Link> links_;
  std::vector<Site> exterior_;
  std::vector<double> exterior_values_;
  std::vector<std::uint8_t> row_valid_;
};

}  // namespace harness
