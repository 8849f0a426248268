#include "harness/events.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "harness/error.hpp"
#include "harness/rng.hpp"

namespace harness {

namespace {

bool earlier(const Event& a, const Event& b) {
  return a.time < b.time || (a.time == b.time && a.site < b.site);
}

constexpr std::uint64_t kCollisionTag = 0xc0111510ULL;

}  // namespace

void EventStream::build_site_index() {
  site_begin_.assign(carrier_size + 1, 0);
  for (const Event& e : events) ++site_begin_[static_cast<std::size_t>(e.site) + 1];
  for (std::size_t i = 1; i < site_begin_.size(); ++i) site_begin_[i] += site_begin_[i - 1];
  by_site_.resize(events.size());
  std::vector<std::size_t> fill(site_begin_.begin(), site_begin_.end() - 1);
  for (std::size_t id = 0; id < events.size(); ++id) {
    by_site_[fill[static_cast<std::size_t>(events[id].site)]++] = static_cast<std::int32_t>(id);
  }
}

void sort_by_time(std::vector<Event>& events, TimeWindow window) {
  const std::size_t n = events.size();
  if (n < 256 || !(window.length() > 0.0)) {
    std::sort(events.begin(), events.end(), earlier);
    return;
  }
  // Bucket pass over the window, then exact sort inside each bucket.
  const std::size_t buckets = n;
  const double scale = static_cast<double>(buckets) / window.length();
  auto bucket_of = [&](double t) {
    auto b = static_cast<std::size_t>(std::max(0.0, (t - window.start) * scale));
    return std::min(b, buckets - 1);
  };
  std::vector<std::size_t> begin(buckets + 1, 0);
  for (const Event& e : events) ++begin[bucket_of(e.time) + 1];
  for (std::size_t b = 1; b <= buckets; ++b) begin[b] += begin[b - 1];
  std::vector<Event> out(n);
  std::vector<std::size_t> fill(begin.begin(), begin.end() - 1);
  for (const Event& e : events) out[fill[bucket_of(e.time)]++] = e;
  for (std::size_t b = 0; b < buckets; ++b) {
    auto first = out.begin() + static_cast<std::ptrdiff_t>(begin[b]);
    auto last = out.begin() + static_cast<std::ptrdiff_t>(begin[b + 1]);
    if (last - first > 1) std::sort(first, last, earlier);
  }
  events = std::move(out);
}

void resolve_time_collisions(EventStream& stream, std::span<const Site> sites) {
  for (int attempt = 0;; ++attempt) {
    sort_by_time(stream.events, stream.window);
    bool clean = true;
    for (std::size_t i = 1; i < stream.events.size(); ++i) {
      if (stream.events[i].time != stream.events[i - 1].time) continue;
      clean = false;
      Event& e = stream.events[i];
      // Neighbouring epochs of the same site bound the redraw.
      double lo = stream.window.start;
      double hi = stream.window.end;
      for (const Event& other : stream.events) {
        if (other.site != e.site || &other == &e) continue;
        if (other.time < e.time) lo = std::max(lo, other.time);
        if (other.time > e.time) hi = std::min(hi, other.time);
      }
      const std::uint64_t key = derive_key(site_key(stream.seed, sites[static_cast<std::size_t>(e.site)]),
                                           kCollisionTag + static_cast<std::uint64_t>(attempt));
      CounterRng rng(key, std::bit_cast<std::uint64_t>(e.time));
      e.time = lo + (hi - lo) * rng.uniform();
    }
    if (clean) return;
    if (attempt > 64) throw Error(ErrorKind::InvalidWindow, "unable to separate event times");
  }
}

EventStream generate_events(const Kernel& k, const Region& region, TimeWindow window,
                            std::uint64_t seed) {
  if (!(window.length() >= 0.0) || !std::isfinite(window.start) || !std::isfinite(window.end)) {
    throw Error(ErrorKind::InvalidWindow, "window end precedes start");
  }
  validate_kernel(k);
  std::vector<double> probs;
  probs.reserve(k.weights.size());
  for (const auto& e : k.weights) probs.push_back(e.p);
  const DiscreteSampler jumps(probs);

  EventStream stream;
  stream.window = window;
  stream.seed = seed;
  stream.region_fingerprint = region.fingerprint();
  stream.carrier_size = region.size();
  const auto sites = region.sites();
  const bool gaussian = k.noise == NoiseLaw::gaussian;
  struct Cursor {
    CounterRng rng{0};
    std::uint64_t n = 0;
    double t = 0.0;
    double paired = 0.0;
  };
  std::vector<Cursor> cursors(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    Cursor& c = cursors[i];
    c.rng = CounterRng(site_key(seed, sites[i]));
    c.t = window.start - std::log(CounterRng::to_open_unit(c.rng.at(0)));
  }
  auto emit = [&](Cursor& c, std::int32_t site) {
    const std::uint64_t n = c.n;
    Event e;
    e.time = c.t;
    if (gaussian) {
      // Events 2m and 2m+1 share one Box-Muller pair drawn at counters 8m+1, 8m+2.
      if ((n & 1) == 0) {
        const double r = std::sqrt(-2.0 * std::log(CounterRng::to_open_unit(c.rng.at(4 * n + 1))));
        const double theta = 2.0 * std::numbers::pi * CounterRng::to_open_unit(c.rng.at(4 * n + 2));
        e.eps = r * std::cos(theta);
        c.paired = r * std::sin(theta);
      } else {
        e.eps = c.paired;
      }
    } else {
      e.eps = noise_draw(k.noise, CounterRng::to_open_unit(c.rng.at(4 * n + 1)),
                         CounterRng::to_open_unit(c.rng.at(4 * n + 2)));
    }
    e.site = site;
    e.jump = jumps(CounterRng::to_open_unit(c.rng.at(4 * n + 3)));
    ++c.n;
    c.t -= std::log(CounterRng::to_open_unit(c.rng.at(4 * c.n)));
    return e;
  };

  // Time slices of a few thousand events keep each sort cache-resident.
  const double expected = static_cast<double>(sites.size()) * window.length();
  const auto slices = static_cast<std::size_t>(std::max(1.0, std::ceil(expected / 8192.0)));
  stream.events.reserve(static_cast<std::size_t>(expected + 4.0 * std::sqrt(expected) + 16.0));
  std::vector<Event> slice;
  for (std::size_t j = 0; j < slices; ++j) {
    const bool last = j + 1 == slices;
    const double lo = window.start + window.length() * static_cast<double>(j) / static_cast<double>(slices);
    const double hi = last ? window.end
                           : window.start + window.length() * static_cast<double>(j + 1) / static_cast<double>(slices);
    slice.clear();
    for (std::size_t i = 0; i < sites.size(); ++i) {
      Cursor& c = cursors[i];
      while (last ? c.t <= hi : c.t < hi) slice.push_back(emit(c, static_cast<std::int32_t>(i)));
    }
    sort_by_time(slice, {lo, hi});
    stream.events.insert(stream.events.end(), slice.begin(), slice.end());
  }
  bool distinct = true;
  for (std::size_t i = 1; i < stream.events.size() && distinct; ++i) {
    distinct = stream.events[i].time != stream.events[i - 1].time;
  }
  if (distinct) return stream;
  resolve_time_collisions(stream, sites);
  return stream;
}

EventStream restrict_stream(const EventStream& stream, const Region& from, const Region& to) {
  if (!stream.matches(from)) throw Error(ErrorKind::StreamMismatch, "stream was not generated on `from`");
  std::vector<int> remap(from.size(), -1);
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (auto j = to.index_of(from.sites()[i])) remap[i] = *j;
  }
  for (const Site& s : to.sites()) {
    if (!from.contains(s)) throw Error(ErrorKind::NonNestedBoxes, "target carrier leaves the source carrier");
  }
  EventStream out;
  out.window = stream.window;
  out.seed = stream.seed;
  out.region_fingerprint = to.fingerprint();
  out.carrier_size = to.size();
  for (std::size_t id = 0; id < stream.events.size(); ++id) {
    const Event& e = stream.events[id];
    const int j = remap[static_cast<std::size_t>(e.site)];
    if (j < 0) continue;
    Event r = e;
    r.site = j;
    out.events.push_back(r);
    out.source_ids.push_back(static_cast<std::int32_t>(id));
  }
  return out;
}

}  // namespace harness
