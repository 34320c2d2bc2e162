#include "fedmuon/ortho.hpp"
#include "fedmuon/rng.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

fedmuon::Matrix random_matrix(int rows, int cols) {
  fedmuon::Xoshiro256 rng(static_cast<std::uint64_t>(rows) * 1000 + static_cast<std::uint64_t>(cols));
  std::normal_distribution<double> normal(0.0, 1.0);
  fedmuon::Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

void BM_OrthonormalizeExact(benchmark::State& state) {
  const auto m = random_matrix(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(fedmuon::orthonormalize_exact(m));
}

void BM_NewtonSchulz(benchmark::State& state) {
  const auto m = random_matrix(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(fedmuon::newton_schulz(m));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({8, 4})->Args({32, 16})->Args({64, 64})->Args({256, 128});
}

}  // namespace

BENCHMARK(BM_OrthonormalizeExact)->Apply(shapes);
BENCHMARK(BM_NewtonSchulz)->Apply(shapes);
