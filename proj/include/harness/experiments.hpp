#pragma once

#include <string>
#include <utility>
#include <vector>

#include "harness/io.hpp"

namespace harness {

inline constexpr int kReportSchemaVersion = 1;

/// One tolerance-checked claim inside a report.
struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // how value is compared with threshold, e.g. "<=" or "in"
  Json detail = Json::object();
};

struct Report {
  std::string experiment;
  std::string identity;  // the claim under test, in words
  std::string oracle;    // what the result is compared against
  Json config;
  std::vector<Check> checks;
  Json results = Json::object();
  /// (file name, CSV content) pairs written under data/.
  std::vector<std::pair<std::string, std::string>> data;

  bool pass() const;
  /// Deterministic except for the timestamp field.
  Json to_json(const std::string& timestamp) const;
};

struct ExperimentInfo {
  std::string name;
  std::string identity;
};

const std::vector<ExperimentInfo>& experiment_registry();

/// Dispatches on config["experiment"]. Throws UnknownExperiment or SchemaError;
/// failed checks are recorded in the report.
Report run_experiment(const Json& config);

/// Writes report.json and data/*.csv under `dir`.
void write_report(const Report& report, const std::string& dir, const std::string& timestamp);

/// Shipped default configuration of an experiment (used by the acceptance suite).
Json default_config(const std::string& experiment);

std::string utc_timestamp();

}  // namespace harness
