#include "bench_support.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ida;

const std::pair<const char*, std::vector<double>> kCases[] = {
    {"Exp.Const", {110.0}},
    {"Gamma.Expon.Lin", {20.0, 4.5, 0.5, 0.8, 0.1}},
    {"GenGam.Const.Const", {95.0, 0.8, 1.0}},
    {"GenF.Const.Const", {205.0, 1.5, 0.5, 0.75}},
};

void BM_LogLikelihood(benchmark::State& state) {
  const auto& [name, theta] = kCases[state.range(0)];
  const auto model = bench::make_model(name, theta);
  const auto sample = bench::make_sample(model, 28, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit::log_likelihood(model.spec, model.theta, sample, model.window));
  }
  state.SetLabel(name);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sample.size()));
}
BENCHMARK(BM_LogLikelihood)->DenseRange(0, 3);

void BM_Fit(benchmark::State& state) {
  const auto& [name, theta] = kCases[state.range(0)];
  const auto model = bench::make_model(name, theta);
  const auto sample = bench::make_sample(model, 28, 11);
  fit::FitOptions options;
  options.restarts = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit::fit(model.spec, sample, model.window, options));
  }
  state.SetLabel(name);
}
BENCHMARK(BM_Fit)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace
