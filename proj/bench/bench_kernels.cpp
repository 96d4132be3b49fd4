#include <benchmark/benchmark.h>

#include <omp.h>

#include <random>
#include <vector>

#include "lbds/path_engine.hpp"
#include "lbds/presets.hpp"
#include "lbds/reflected_sde.hpp"
#include "lbds/regression.hpp"

namespace {

using namespace lbds;

const LevyCharacteristics& chars() {
  static const auto c = models::mixed();
  return c;
}
const MartingaleBasis& basis() {
  static const auto b = build_basis(chars());
  return b;
}
TimeGrid grid() { return TimeGrid::uniform(0.0, 1.0, 50); }

template <bool Parallel>
void BM_simulate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto b = Parallel ? simulate_batch(chars(), basis(), grid(), n, 7) : simulate_batch_serial(chars(), basis(), grid(), n, 7);
    benchmark::DoNotOptimize(b);
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) * state.range(0));
}

template <bool Parallel>
void BM_reflect(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = models::poisson(1.0);
  const auto batch = simulate_batch(c, build_basis(c), grid(), n, 7);
  const auto domain = SmoothDomain::interval(0.0, 1.0);
  const SigmaField sigma = [](std::span<const double> x, std::span<double> out) { out[0] = 0.5 * (1.0 - x[0]); };
  for (auto _ : state) {
    auto r = Parallel ? solve_paths(domain, c, sigma, {0, {0.5}}, batch)
                      : solve_paths_serial(domain, c, sigma, {0, {0.5}}, batch);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) * state.range(0));
}

template <bool Parallel>
void BM_regression(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(n, 2), y(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = nd(gen);
    x(i, 1) = nd(gen);
    for (Eigen::Index k = 0; k < 3; ++k) y(i, k) = x(i, 0) * x(i, 1) + nd(gen);
  }
  std::vector<std::size_t> group(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < group.size(); ++i) group[i] = i % 4;
  for (auto _ : state) {
    auto fit = Parallel ? conditional_expectation(x, group, y) : conditional_expectation_serial(x, group, y);
    benchmark::DoNotOptimize(fit);
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) * state.range(0));
}

}  // namespace

BENCHMARK(BM_simulate<false>)->Name("simulate/serial")->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_simulate<true>)->Name("simulate/openmp")->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_reflect<false>)->Name("reflect/serial")->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_reflect<true>)->Name("reflect/openmp")->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_regression<false>)->Name("regression/serial")->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_regression<true>)->Name("regression/openmp")->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
