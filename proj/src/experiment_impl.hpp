#pragma once

// Shared plumbing for the experiment implementations.

#include <cstdint>
#include <string>
#include <vector>

#include "harness/error.hpp"
#include "harness/experiments.hpp"

namespace harness::detail {

template <class T>
T param(const Json& config, const char* key, T fallback) {
  if (!config.contains(key)) return fallback;
  try {
    return config.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("config field '") + key + "': " + e.what());
  }
}

inline Check make_check(std::string name, bool pass, double value, double threshold,
                        std::string relation, Json detail = Json::object()) {
  return {std::move(name), pass, value, threshold, std::move(relation), std::move(detail)};
}

/// Heights drawn uniformly from [-scale, scale], keyed by site so they do not
/// depend on carrier order.
double site_uniform(std::uint64_t key, const Site& s, double scale);

/// Kernel menu used by the pathwise experiments: nearest neighbour, a drifted
/// kernel, and a range-2 kernel.
std::vector<Kernel> test_kernels(int dim);

Report representation_check(const Json& config);
Report window_variance_experiment(const Json& config);
Report difference_variance_experiment(const Json& config);
Report convergence_rate(const Json& config);
Report martingale_experiment(const Json& config);
Report gibbs_covariance(const Json& config);
Report harness_property(const Json& config);
Report detailed_balance(const Json& config);
Report uniqueness_finite(const Json& config);
Report space_convergence(const Json& config);
Report no_noise_harmonic(const Json& config);

}  // namespace harness::detail
