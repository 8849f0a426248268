// Serial vs OpenMP replica loops on the two hot kernels: forward evolution and
// the flat dual profile.

#include <benchmark/benchmark.h>

#include "harness/dual.hpp"
#include "harness/engine.hpp"
#include "harness/parallel.hpp"
#include "harness/rng.hpp"

using namespace harness;

namespace {

void forward(benchmark::State& state, Execution mode) {
  const Kernel k = Kernel::nearest_neighbor(3);
  const Region region = Region::cube(3, -5, 5);
  const Lattice lattice(k, region);
  const auto origin = static_cast<std::size_t>(*region.index_of(Site{}));
  const int replicas = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto out = map_replicas(replicas, [&](int r) {
      const EventStream ev = generate_events(k, region, {0.0, 10.0}, derive_key(1, static_cast<std::uint64_t>(r)));
      std::vector<double> h(region.size(), 0.0);
      advance(ev, lattice, h, Dynamics::standard, 10.0);
      return h[origin];
    }, mode);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * replicas);
}

void dual_profile(benchmark::State& state, Execution mode) {
  const Kernel k = Kernel::nearest_neighbor(1);
  const Region region = Region::cube(1, -60, 60);
  const Lattice lattice(k, region);
  const int anchor = *region.index_of(Site{});
  const double lags[] = {5.0, 20.0, 80.0};
  const int replicas = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto out = map_replicas(replicas, [&](int r) {
      const EventStream ev = generate_events(k, region, {-80.0, 0.0}, derive_key(2, static_cast<std::uint64_t>(r)));
      return flat_dual_profile(ev, lattice, anchor, 0.0, lags);
    }, mode);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * replicas);
}

}  // namespace

BENCHMARK_CAPTURE(forward, serial, Execution::serial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(forward, parallel, Execution::parallel)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(dual_profile, serial, Execution::serial)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(dual_profile, parallel, Execution::parallel)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
