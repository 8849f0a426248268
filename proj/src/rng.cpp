#include "harness/rng.hpp"

#include <algorithm>

#include "harness/error.hpp"

namespace harness {

std::uint64_t site_key(std::uint64_t seed, const Site& site) {
  std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
  for (int c : site) h = mix64(h + static_cast<std::uint32_t>(c) + 0x9e3779b97f4a7c15ULL);
  return h;
}

DiscreteSampler::DiscreteSampler(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (weights.empty() || !(total > 0.0)) throw Error(ErrorKind::EmptySupport, "discrete law has no mass");
  // Vose's alias table: one uniform picks a column, its fraction picks the entry.
  const std::size_t n = weights.size();
  threshold_.assign(n, 1.0);
  alias_.resize(n);
  std::vector<double> scaled(n);
  std::vector<int> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    alias_[i] = static_cast<int>(i);
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<int>(i));
  }
  while (!small.empty() && !large.empty()) {
    const int s = small.back();
    small.pop_back();
    const int l = large.back();
    threshold_[static_cast<std::size_t>(s)] = scaled[static_cast<std::size_t>(s)];
    alias_[static_cast<std::size_t>(s)] = l;
    scaled[static_cast<std::size_t>(l)] -= 1.0 - scaled[static_cast<std::size_t>(s)];
    if (scaled[static_cast<std::size_t>(l)] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding. A zero weight must never keep its own column.
  for (int i : small) {
    if (weights[static_cast<std::size_t>(i)] == 0.0) {
      threshold_[static_cast<std::size_t>(i)] = 0.0;
      alias_[static_cast<std::size_t>(i)] = static_cast<int>(std::max_element(weights.begin(), weights.end()) - weights.begin());
    }
  }
}

int DiscreteSampler::operator()(double u) const {
  const double x = u * static_cast<double>(threshold_.size());
  const auto column = std::min(static_cast<std::size_t>(x), threshold_.size() - 1);
  return x - static_cast<double>(column) < threshold_[column] ? static_cast<int>(column) : alias_[column];
}

}  // namespace harness
