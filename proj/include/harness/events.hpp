#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "harness/lattice.hpp"

namespace harness {

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool contains(double t) const { return t >= start && t <= end; }
};

/// One Poisson epoch with its marks. `site` is a carrier index; `jump` indexes
/// the kernel's weight table.
struct Event {
  double time = 0.0;
  double eps = 0.0;
  std::int32_t site = 0;
  std::int32_t jump = 0;
};

/// Marked rate-1 Poisson epochs at every carrier site on a window, merged in
/// strictly increasing time.
struct EventStream {
  TimeWindow window;
  std::uint64_t seed = 0;
  std::uint64_t region_fingerprint = 0;
  std::size_t carrier_size = 0;
  std::vector<Event> events;
  /// For restricted streams: id of each event in the source stream.
  std::vector<std::int32_t> source_ids;

  /// Event ids of one site, increasing in time. Requires build_site_index().
  std::span<const std::int32_t> site_events(int site) const {
    return {by_site_.data() + site_begin_[static_cast<std::size_t>(site)],
            by_site_.data() + site_begin_[static_cast<std::size_t>(site) + 1]};
  }

  void build_site_index();
  bool matches(const Region& region) const {
    return region.fingerprint() == region_fingerprint && region.size() == carrier_size;
  }

 private:
  std::vector<std::size_t> site_begin_;
  std::vector<std::int32_t> by_site_;
};

/// Per-site substreams are keyed by (seed, site coordinates), so a site's
/// events do not depend on the rest of the carrier.
EventStream generate_events(const Kernel& k, const Region& region, TimeWindow window,
                            std::uint64_t seed);

/// Same stream, restricted to the carrier of `to` (which must lie inside `from`'s).
EventStream restrict_stream(const EventStream& stream, const Region& from, const Region& to);

/// Sorts by (time, site) and redraws the time of any event that ties with its
/// predecessor until all timestamps are distinct.
void resolve_time_collisions(EventStream& stream, std::span<const Site> sites);

void sort_by_time(std::vector<Event>& events, TimeWindow window);

}  // namespace harness
