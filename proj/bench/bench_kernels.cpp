// Serial reference kernels against their OpenMP forms.
#include <benchmark/benchmark.h>

#include <vector>

#include "capsre/kernels.hpp"
#include "capsre/rng.hpp"

namespace {

using capsre::kernels::Exec;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  capsre::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

Exec exec_of(const benchmark::State& state) {
  return state.range(1) == 0 ? Exec::kSerial : Exec::kParallel;
}

void BM_GemmNN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1);
  const auto b = random_values(n * n, 2);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    capsre::kernels::gemm_nn(a, b, out, n, n, n, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_GemmNN)->ArgsProduct({{64, 256}, {0, 1}});

void BM_GemmTN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 3);
  const auto b = random_values(n * n, 4);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    capsre::kernels::gemm_tn(a, b, out, n, n, n, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_GemmTN)->ArgsProduct({{64, 256}, {0, 1}});

// Routing shapes: H = (L+1) * C children, E parents, d = 8.
void BM_RouteAggregate(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const std::size_t e = 53, d = 8;
  const auto c = random_values(h * e, 5);
  const auto votes = random_values(h * e * d, 6);
  std::vector<double> out(e * d);
  for (auto _ : state) {
    capsre::kernels::route_aggregate(c, votes, out, h, e, d, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_RouteAggregate)->ArgsProduct({{256, 3872}, {0, 1}});

void BM_RouteAgreement(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const std::size_t e = 53, d = 8;
  const auto votes = random_values(h * e * d, 7);
  const auto parents = random_values(e * d, 8);
  std::vector<double> out(h * e);
  for (auto _ : state) {
    capsre::kernels::route_agreement(votes, parents, out, h, e, d, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_RouteAgreement)->ArgsProduct({{256, 3872}, {0, 1}});

}  // namespace

BENCHMARK_MAIN();
