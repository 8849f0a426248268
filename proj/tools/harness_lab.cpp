// harness-lab: run experiments, list them, and generate/replay event streams.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "harness/error.hpp"
#include "harness/events.hpp"
#include "harness/experiments.hpp"
#include "harness/io.hpp"

namespace {

using namespace harness;

HeightField initial_field(const std::optional<std::string>& path, const Region& region) {
  if (!path) return flat_field(region);
  // inline JSON first, then a file
  Json j = Json::parse(*path, nullptr, false);
  if (j.is_discarded()) j = read_json_file(*path);
  if (j.is_number()) {
    HeightField h = flat_field(region, j.get<double>());
    for (int p : region.pinned_indices()) h[static_cast<std::size_t>(p)] = 0.0;  // pinned stay at 0
    return h;
  }
  if (!j.contains("values")) throw Error(ErrorKind::SchemaError, "initial field needs 'values' or a number");
  HeightField h{j.at("values").get<std::vector<double>>()};
  if (h.size() != region.size()) throw Error(ErrorKind::InitialMismatch, "initial field size differs from carrier");
  return h;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error(ErrorKind::SchemaError, "cannot write " + path);
  return file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harness process laboratory"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  std::string config_path, out_dir;
  run->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", out_dir, "report directory (default: config 'output' or out/<experiment>)");

  auto* list = app.add_subcommand("list-experiments", "List registered experiments");

  auto* gen = app.add_subcommand("generate", "Write an event stream as JSONL");
  std::string kernel_path, region_path, events_out;
  double w_start = 0.0, w_end = 1.0;
  std::uint64_t seed = 1;
  gen->add_option("--kernel", kernel_path, "kernel JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--region", region_path, "region JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--start", w_start, "window start");
  gen->add_option("--end", w_end, "window end");
  gen->add_option("--seed", seed, "stream seed");
  gen->add_option("-o,--output", events_out, "output file (default stdout)");

  auto* replay = app.add_subcommand("replay", "Evolve a recorded stream and print the trajectory CSV");
  std::string events_path, traj_out;
  std::optional<std::string> zeta_path;
  std::vector<double> times;
  replay->add_option("events", events_path, "events JSONL")->required()->check(CLI::ExistingFile);
  replay->add_option("--kernel", kernel_path, "kernel JSON")->required()->check(CLI::ExistingFile);
  replay->add_option("--region", region_path, "region JSON")->required()->check(CLI::ExistingFile);
  replay->add_option("--zeta", zeta_path, "initial field, inline or file: JSON number or {\"values\": [...]}");
  replay->add_option("--times", times, "sample times (default: window end)");
  replay->add_option("-o,--output", traj_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& info : experiment_registry()) std::cout << info.name << "\t" << info.identity << "\n";
      return 0;
    }
    if (*run) {
      const Json config = read_json_file(config_path);
      const Report report = run_experiment(config);
      std::string dir = out_dir;
      if (dir.empty()) dir = config.value("output", "out/" + report.experiment);
      write_report(report, dir, utc_timestamp());
      for (const Check& c : report.checks) {
        std::cout << (c.pass ? "PASS  " : "FAIL  ") << c.name << "  (" << c.value << " " << c.relation << " "
                  << c.threshold << ")\n";
      }
      std::cout << report.experiment << ": " << (report.pass() ? "pass" : "FAIL") << "  -> " << dir
                << "/report.json\n";
      return report.pass() ? 0 : 1;
    }
    const Kernel k = kernel_from_json(read_json_file(kernel_path));
    const Region region = region_from_json(read_json_file(region_path));
    if (*gen) {
      const EventStream ev = generate_events(k, region, {w_start, w_end}, seed);
      std::ofstream file;
      write_events_jsonl(open_output(events_out, file), ev, k, region);
      return 0;
    }
    std::ifstream in(events_path);
    const EventStream ev = read_events_jsonl(in, k, region);
    if (times.empty()) times.push_back(ev.window.end);
    const Trajectory traj = evolve(ev, k, region, initial_field(zeta_path, region), Dynamics::standard, times);
    std::ofstream file;
    write_trajectory_csv(open_output(traj_out, file), traj, region);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
