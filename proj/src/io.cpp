#include "harness/io.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "harness/error.hpp"

namespace harness {

namespace {

template <class F>
auto schema(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string(what) + ": " + e.what());
  }
}

}  // namespace

Json site_to_json(const Site& s, int dim) {
  Json out = Json::array();
  for (int a = 0; a < dim; ++a) out.push_back(s[a]);
  return out;
}

Site site_from_json(const Json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw Error(ErrorKind::SchemaError, "site must be an array of " + std::to_string(dim) + " integers");
  }
  Site s{};
  for (int a = 0; a < dim; ++a) s[a] = j.at(static_cast<std::size_t>(a)).get<int>();
  return s;
}

Json kernel_to_json(const Kernel& k) {
  Json w = Json::array();
  for (const KernelEntry& e : k.weights) w.push_back({{"offset", site_to_json(e.offset, k.dim)}, {"p", e.p}});
  return {{"d", k.dim}, {"weights", w}, {"noise", std::string(to_string(k.noise))}, {"sigma", k.sigma}};
}

Kernel kernel_from_json(const Json& j) {
  return schema("kernel", [&] {
    const int d = j.at("d").get<int>();
    if (d < 1 || d > kMaxDim) throw Error(ErrorKind::SchemaError, "kernel dimension out of range");
    std::vector<KernelEntry> weights;
    for (const Json& e : j.at("weights")) {
      weights.push_back({site_from_json(e.at("offset"), d), e.at("p").get<double>()});
    }
    const NoiseLaw noise = parse_noise_law(j.value("noise", std::string("gaussian")));
    Kernel k = Kernel::from_weights(d, std::move(weights), noise, j.value("sigma", 1.0));
    validate_kernel(k);
    return k;
  });
}

Json region_to_json(const Region& region) {
  const int d = region.dim();
  Json pinned = Json::array();
  for (int p : region.pinned_indices()) pinned.push_back(site_to_json(region.sites()[static_cast<std::size_t>(p)], d));
  Json excluded = Json::array();
  for (const Site& s : region.excluded()) excluded.push_back(site_to_json(s, d));
  Json gamma = Json::array();
  for (const auto& [s, v] : region.gamma_entries()) gamma.push_back({{"site", site_to_json(s, d)}, {"value", v}});
  Json out = {{"box", {{"lo", site_to_json(region.box().lo, d)}, {"hi", site_to_json(region.box().hi, d)}}},
              {"pinned", pinned},
              {"boundary", region.boundary() == BoundaryMode::free ? "free" : "fixed"},
              {"gamma", gamma}};
  if (!excluded.empty()) out["excluded"] = excluded;
  return out;
}

Region region_from_json(const Json& j) {
  return schema("region", [&] {
    const Json& box = j.at("box");
    const int d = static_cast<int>(box.at("lo").size());
    if (d < 1 || d > kMaxDim) throw Error(ErrorKind::SchemaError, "region dimension out of range");
    const Box b{site_from_json(box.at("lo"), d), site_from_json(box.at("hi"), d)};
    std::vector<Site> pinned, excluded;
    for (const Json& s : j.value("pinned", Json::array())) pinned.push_back(site_from_json(s, d));
    for (const Json& s : j.value("excluded", Json::array())) excluded.push_back(site_from_json(s, d));
    const std::string mode = j.value("boundary", std::string("fixed"));
    if (mode != "fixed" && mode != "free") throw Error(ErrorKind::SchemaError, "boundary must be fixed or free");
    Region region(d, b, excluded, pinned, mode == "free" ? BoundaryMode::free : BoundaryMode::fixed_gamma);
    const Json gamma = j.value("gamma", Json::array());
    if (!gamma.empty()) {
      if (mode == "free") throw Error(ErrorKind::SchemaError, "free boundary takes no gamma");
      std::vector<std::pair<Site, double>> entries;
      for (const Json& g : gamma) entries.emplace_back(site_from_json(g.at("site"), d), g.at("value").get<double>());
      region.set_gamma(std::move(entries));
    }
    return region;
  });
}

void write_events_jsonl(std::ostream& out, const EventStream& stream, const Kernel& k,
                        const Region& region) {
  const int d = region.dim();
  out << Json{{"window", {stream.window.start, stream.window.end}}, {"seed", stream.seed}}.dump() << '\n';
  for (const Event& e : stream.events) {
    const Json line = {{"site", site_to_json(region.sites()[static_cast<std::size_t>(e.site)], d)},
                       {"time", e.time},
                       {"eps", e.eps},
                       {"jump", site_to_json(k.weights[static_cast<std::size_t>(e.jump)].offset, d)}};
    out << line.dump() << '\n';
  }
}

EventStream read_events_jsonl(std::istream& in, const Kernel& k, const Region& region) {
  const int d = region.dim();
  std::unordered_map<Site, int, SiteHash> jump_index;
  for (std::size_t a = 0; a < k.weights.size(); ++a) jump_index.emplace(k.weights[a].offset, static_cast<int>(a));
  EventStream stream;
  stream.region_fingerprint = region.fingerprint();
  stream.carrier_size = region.size();
  bool have_window = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      if (j.contains("window")) {
        stream.window = {j["window"].at(0).get<double>(), j["window"].at(1).get<double>()};
        stream.seed = j.value("seed", std::uint64_t{0});
        have_window = true;
        continue;
      }
      const auto idx = region.index_of(site_from_json(j.at("site"), d));
      if (!idx) throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": site outside carrier");
      const auto jump = jump_index.find(site_from_json(j.at("jump"), d));
      if (jump == jump_index.end()) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": jump not in kernel");
      }
      stream.events.push_back({j.at("time").get<double>(), j.at("eps").get<double>(), *idx, jump->second});
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ParseError) throw;
      throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_window) {
    double hi = 0.0;
    for (const Event& e : stream.events) hi = std::max(hi, e.time);
    stream.window = {0.0, hi};
  }
  for (const Event& e : stream.events) {
    if (!stream.window.contains(e.time)) throw Error(ErrorKind::ParseError, "event time outside the window");
  }
  sort_by_time(stream.events, stream.window);
  return stream;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const Region& region) {
  const int d = region.dim();
  out << "time";
  for (int a = 0; a < d; ++a) out << ",x" << a;
  out << ",value\n";
  out << std::setprecision(17);
  for (const Snapshot& s : traj.snapshots) {
    for (std::size_t i = 0; i < region.size(); ++i) {
      out << s.time;
      for (int a = 0; a < d; ++a) out << ',' << region.sites()[i][a];
      out << ',' << s.field[i] << '\n';
    }
  }
}

Json dual_weights_to_json(const DualWeights& w, const EventStream& events, const Lattice& lattice) {
  const Region& region = lattice.region();
  const int d = region.dim();
  Json epochs = Json::array();
  for (const EpochWeight& e : w.epochs) {
    const Event& ev = events.events[static_cast<std::size_t>(e.event)];
    epochs.push_back({{"event", e.event},
                      {"site", site_to_json(region.sites()[static_cast<std::size_t>(ev.site)], d)},
                      {"time", ev.time},
                      {"weight", e.weight}});
  }
  auto masses = [&](const std::vector<double>& m, auto&& site_of) {
    Json out = Json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] != 0.0) out.push_back({{"site", site_to_json(site_of(i), d)}, {"mass", m[i]}});
    }
    return out;
  };
  auto carrier = [&](std::size_t i) { return region.sites()[i]; };
  auto exterior = [&](std::size_t i) { return lattice.exterior_sites()[i]; };
  return {{"anchor", site_to_json(region.sites()[static_cast<std::size_t>(w.anchor)], d)},
          {"t", w.t},
          {"s", w.s},
          {"epochs", epochs},
          {"terminalInterior", masses(w.terminal_interior, carrier)},
          {"absorbedExterior", masses(w.absorbed_exterior, exterior)},
          {"absorbedPinned", masses(w.absorbed_pinned, carrier)}};
}

void write_martingale_csv(std::ostream& out, const MartingaleTable& table) {
  out << "replica,m,increment\n" << std::setprecision(17);
  for (std::size_t r = 0; r < table.increments.size(); ++r) {
    for (std::size_t m = 0; m < table.increments[r].size(); ++m) {
      out << r << ',' << m << ',' << table.increments[r][m] << '\n';
    }
  }
}

Json model_to_json(const GibbsModel& model) {
  const int d = model.region.dim();
  Json sites = Json::array();
  for (int i : model.free_sites) sites.push_back(site_to_json(model.region.sites()[static_cast<std::size_t>(i)], d));
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(model.covariance.size()));
  for (Eigen::Index r = 0; r < model.covariance.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.covariance.cols(); ++c) flat.push_back(model.covariance(r, c));
  }
  return {{"freeSites", sites}, {"n", model.dim()}, {"sigma", flat}};
}

void write_samples_csv(std::ostream& out, const GibbsModel& model,
                       const std::vector<HeightField>& samples) {
  const int d = model.region.dim();
  for (std::size_t a = 0; a < model.free_sites.size(); ++a) {
    const Site& s = model.region.sites()[static_cast<std::size_t>(model.free_sites[a])];
    out << (a ? "," : "") << "h";
    for (int c = 0; c < d; ++c) out << (c ? "_" : "(") << s[c];
    out << ")";
  }
  out << '\n' << std::setprecision(17);
  for (const HeightField& h : samples) {
    for (std::size_t a = 0; a < model.free_sites.size(); ++a) {
      out << (a ? "," : "") << h[static_cast<std::size_t>(model.free_sites[a])];
    }
    out << '\n';
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ParseError, path + ": " + e.what());
  }
}

}  // namespace harness
