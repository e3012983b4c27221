#include "bench_support.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ida;

void BM_SimulateSet(benchmark::State& state) {
  const auto model = state.range(0) == 0
                         ? bench::make_model("Exp.Const", {110.0})
                         : bench::make_model("GenF.Const.Const", {205.0, 1.5, 0.5, 0.75});
  const auto m = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim::simulate_set(model, -3.3, -3.25, -0.5, m, 3));
  }
  state.SetLabel(model.spec.name());
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_SimulateSet)->Args({0, 1000})->Args({1, 1000})->Unit(benchmark::kMillisecond);

}  // namespace
