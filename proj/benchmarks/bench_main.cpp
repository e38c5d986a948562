#include <benchmark/benchmark.h>

#include "snapdm/diffusion_map.hpp"
#include "snapdm/ensemble_kernel.hpp"
#include "snapdm/generators.hpp"
#include "snapdm/wavelet.hpp"

namespace {

using namespace snapdm;

SnapshotEnsemble random_ensemble(std::uint32_t side, std::size_t shots, std::uint64_t seed, double parameter) {
  Rng rng(seed);
  SnapshotEnsemble e{parameter, "", {}};
  for (std::size_t k = 0; k < shots; ++k) {
    std::vector<std::int8_t> v(std::size_t{side} * side);
    for (auto& x : v) x = rng.bernoulli(0.3 + 0.4 * parameter) ? 1 : -1;
    e.snapshots.emplace_back(side, side, std::move(v));
  }
  return e;
}

void BM_HaarTransform2D(benchmark::State& state) {
  const auto side = static_cast<std::uint32_t>(state.range(0));
  const auto layout = resolve_layout(side, side, {});
  Rng rng(1);
  Eigen::VectorXd grid(side * side);
  for (auto& x : grid) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(apply_weights(haar_transform(grid, side, side, layout), layout));
}
BENCHMARK(BM_HaarTransform2D)->Arg(8)->Arg(16)->Arg(32);

void BM_ComputeStats(benchmark::State& state) {
  const auto side = static_cast<std::uint32_t>(state.range(0));
  const auto pe = preprocess_ensemble(random_ensemble(side, 500, 2, 0.5), {});
  for (auto _ : state) benchmark::DoNotOptimize(compute_stats(pe));
}
BENCHMARK(BM_ComputeStats)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_EmbedSweep(benchmark::State& state) {
  std::vector<SnapshotEnsemble> sweep;
  const auto n = static_cast<int>(state.range(0));
  for (int i = 0; i < n; ++i) sweep.push_back(random_ensemble(16, 500, 10 + i, static_cast<double>(i) / (n - 1)));
  PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(embed_ensembles(sweep, cfg));
}
BENCHMARK(BM_EmbedSweep)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_TfimGroundState(benchmark::State& state) {
  const int length = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(tfim_ground_state(length, 1.0));
}
BENCHMARK(BM_TfimGroundState)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
