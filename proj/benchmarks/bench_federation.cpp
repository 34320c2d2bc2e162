#include "fedmuon/federation.hpp"
#include "fedmuon/problems.hpp"

#include <benchmark/benchmark.h>

namespace {

// Full runs of 64 iterations; items processed = worker steps.
void BM_Federation(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  const bool exact = state.range(1) == 0;
  const auto problem = fedmuon::make_quadratic_align(32, 16, workers, workers > 1 ? 0.5 : 0.0, 1);
  const auto noise = fedmuon::NoiseModel::gaussian(0.5);
  fedmuon::FederationConfig config;
  config.workers = workers;
  config.iters = 64;
  config.period = 4;
  config.eta = 0.01;
  config.beta = 0.1;
  config.optimizer = fedmuon::FedMuonKind{exact ? fedmuon::OrthoMethod::Exact
                                                : fedmuon::OrthoMethod::NewtonSchulz};
  for (auto _ : state) benchmark::DoNotOptimize(fedmuon::run_federation(config, problem, noise));
  state.SetItemsProcessed(state.iterations() * config.iters * workers);
  state.SetLabel(exact ? "svd" : "newton-schulz");
}

}  // namespace

BENCHMARK(BM_Federation)->ArgsProduct({{1, 4, 8}, {0, 1}})->Unit(benchmark::kMillisecond);
