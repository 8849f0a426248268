#include "harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "experiment_impl.hpp"
#include "harness/rng.hpp"

namespace harness {

namespace detail {

double site_uniform(std::uint64_t key, const Site& s, double scale) {
  return scale * (2.0 * CounterRng::to_open_unit(site_key(key, s)) - 1.0);
}

std::vector<Kernel> test_kernels(int dim) {
  auto unit = [](int axis, int step) {
    Site s{};
    s[axis] = step;
    return s;
  };
  const double share = 1.0 / dim;
  std::vector<KernelEntry> drift, wide;
  wide.push_back({Site{}, 0.1});
  for (int a = 0; a < dim; ++a) {
    drift.push_back({unit(a, 1), 0.7 * share});
    drift.push_back({unit(a, -1), 0.3 * share});
    wide.push_back({unit(a, 1), 0.3 * share});
    wide.push_back({unit(a, -1), 0.3 * share});
    wide.push_back({unit(a, 2), 0.15 * share});
    wide.push_back({unit(a, -2), 0.15 * share});
  }
  return {Kernel::nearest_neighbor(dim), Kernel::from_weights(dim, std::move(drift)),
          Kernel::from_weights(dim, std::move(wide))};
}

}  // namespace detail

bool Report::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

Json Report::to_json(const std::string& timestamp) const {
  Json criteria = Json::array();
  for (const Check& c : checks) {
    criteria.push_back({{"name", c.name},
                        {"pass", c.pass},
                        {"value", c.value},
                        {"threshold", c.threshold},
                        {"relation", c.relation},
                        {"detail", c.detail}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"experiment", experiment},
          {"identity", identity},
          {"oracle", oracle},
          {"timestamp", timestamp},
          {"seed", config.value("seed", std::uint64_t{0})},
          {"config", config},
          {"pass", pass()},
          {"criteria", criteria},
          {"results", results}};
}

const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> registry = {
      {"representation-check", "forward heights equal the exact backward-walk representation"},
      {"martingale", "flat-start heights on nested windows form a martingale; variances grow with window and box"},
      {"window-variance", "flat-start variance equals the D-walk occupation time at the origin"},
      {"difference-variance", "height-difference variance equals twice the occupation-time gap and tends to the Green's function"},
      {"convergence-rate", "residual occupation tails decay with exponents 1-d/2 and -d/2"},
      {"space-convergence", "nested-box coupled fields telescope and converge in L2"},
      {"gibbs-covariance", "Gibbs covariance equals the absorbed-walk Green's function"},
      {"detailed-balance", "Gaussian harness dynamics are reversible for the harmonic crystal"},
      {"harness-property", "conditional means of the Gibbs field are kernel averages"},
      {"no-noise-harmonic", "harmonic data are fixed by the noiseless dynamics; heights split into noise and initial parts"},
      {"uniqueness-finite", "Gibbs law is invariant and couplings contract with the surviving backward mass"},
  };
  return registry;
}

Report run_experiment(const Json& config) {
  if (!config.is_object()) throw Error(ErrorKind::SchemaError, "config must be a JSON object");
  const std::string name = detail::param<std::string>(config, "experiment", "");
  if (name.empty()) throw Error(ErrorKind::SchemaError, "config needs an 'experiment' field");
  using Runner = Report (*)(const Json&);
  static const std::vector<std::pair<std::string, Runner>> runners = {
      {"representation-check", detail::representation_check},
      {"martingale", detail::martingale_experiment},
      {"window-variance", detail::window_variance_experiment},
      {"difference-variance", detail::difference_variance_experiment},
      {"convergence-rate", detail::convergence_rate},
      {"space-convergence", detail::space_convergence},
      {"gibbs-covariance", detail::gibbs_covariance},
      {"detailed-balance", detail::detailed_balance},
      {"harness-property", detail::harness_property},
      {"no-noise-harmonic", detail::no_noise_harmonic},
      {"uniqueness-finite", detail::uniqueness_finite},
  };
  for (const auto& [n, run] : runners) {
    if (n != name) continue;
    Report r = run(config);
    r.experiment = name;
    for (const auto& info : experiment_registry()) {
      if (info.name == name) r.identity = info.identity;
    }
    r.config = config;
    return r;
  }
  throw Error(ErrorKind::UnknownExperiment, "no experiment named '" + name + "'");
}

void write_report(const Report& report, const std::string& dir, const std::string& timestamp) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "data");
  std::ofstream(fs::path(dir) / "report.json") << report.to_json(timestamp).dump(2) << '\n';
  for (const auto& [file, content] : report.data) std::ofstream(fs::path(dir) / "data" / file) << content;
}

Json default_config(const std::string& experiment) {
  for (const auto& info : experiment_registry()) {
    if (info.name == experiment) return {{"experiment", experiment}, {"seed", 20260101}};
  }
  throw Error(ErrorKind::UnknownExperiment, "no experiment named '" + experiment + "'");
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace harness
