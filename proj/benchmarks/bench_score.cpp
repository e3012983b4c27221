#include "bench_support.hpp"

#include "ida/score.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ida;

void BM_ScoreCell(benchmark::State& state) {
  const auto model = bench::make_model("Exp.Const", {110.0});
  const auto set = sim::simulate_set(model, -3.25, -3.25, -0.5,
                                     static_cast<std::size_t>(state.range(0)), 5);
  const auto observed = sim::simulate_set(model, -3.25, -3.25, -0.5, 1, 6).paths.front();
  const score::MinuteGrid grid{-3.25, -0.5};
  const auto taus = score::tau_grid();
  for (auto _ : state) {
    benchmark::DoNotOptimize(score::score_cell(observed, set.paths, grid, taus));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreCell)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
