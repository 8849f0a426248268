#pragma once

#include <iosfwd>
#include <json.hpp>
#include <string>

#include "harness/dual.hpp"
#include "harness/engine.hpp"
#include "harness/events.hpp"
#include "harness/gibbs.hpp"
#include "harness/lattice.hpp"

namespace harness {

using Json = nlohmann::json;

/// {"d", "weights": [{"offset", "p"}], "noise", "sigma"}. Throws SchemaError.
Json kernel_to_json(const Kernel& k);
Kernel kernel_from_json(const Json& j);

/// {"box": {"lo", "hi"}, "pinned", "boundary", "gamma": [{"site", "value"}]},
/// plus an optional "excluded" site list.
Json region_to_json(const Region& region);
Region region_from_json(const Json& j);

Json site_to_json(const Site& s, int dim);
Site site_from_json(const Json& j, int dim);

/// First line: {"window": [s, t], "seed": n}; then one event per line with
/// site coordinates, time, eps and the jump offset.
void write_events_jsonl(std::ostream& out, const EventStream& stream, const Kernel& k,
                        const Region& region);
/// Throws ParseError on malformed lines or sites outside the carrier.
EventStream read_events_jsonl(std::istream& in, const Kernel& k, const Region& region);

/// Long format: time, x0..x{d-1}, value.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const Region& region);

Json dual_weights_to_json(const DualWeights& w, const EventStream& events, const Lattice& lattice);

/// replica, m, increment.
void write_martingale_csv(std::ostream& out, const MartingaleTable& table);

/// {"freeSites": [...], "sigma": row-major covariance, "n"}.
Json model_to_json(const GibbsModel& model);

/// One row per sample over the free sites.
void write_samples_csv(std::ostream& out, const GibbsModel& model,
                       const std::vector<HeightField>& samples);

Json read_json_file(const std::string& path);

}  // namespace harness
