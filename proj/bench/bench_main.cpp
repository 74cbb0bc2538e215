#include <benchmark/benchmark.h>

#include <vector>

#include "pirnn/kernels.hpp"
#include "pirnn/parallel.hpp"
#include "pirnn/training.hpp"

using namespace pirnn;

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

template <bool Reference>
void BM_gemm_nn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto r = static_cast<std::size_t>(state.range(1));
  const auto a = filled(r * n, 1), b = filled(n * n, 2);
  std::vector<double> c(r * n);
  for (auto _ : state) {
    if constexpr (Reference) {
      kernels::reference::gemm_nn(a, b, c, r, n, n);
    } else {
      kernels::gemm_nn(a, b, c, r, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * r * n * n));
}

template <bool Reference>
void BM_gemm_nt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto r = static_cast<std::size_t>(state.range(1));
  const auto a = filled(r * n, 1), b = filled(n * n, 2);
  std::vector<double> c(r * n);
  for (auto _ : state) {
    if constexpr (Reference) {
      kernels::reference::gemm_nt(a, b, c, r, n, n);
    } else {
      kernels::gemm_nt(a, b, c, r, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * r * n * n));
}

parallel::Execution exec_of(const benchmark::State& state) {
  return state.range(0) ? parallel::Execution::openmp : parallel::Execution::serial;
}

SimConfig bench_sim() {
  SimConfig c;
  c.seed = 3;
  return c;
}

void BM_generate_dataset(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(parallel::generate_dataset(bench_sim(), 32, exec_of(state)));
}

void BM_batch_gradient(benchmark::State& state) {
  const auto scenes = parallel::generate_dataset(bench_sim(), 8, parallel::Execution::serial);
  const auto model = make_model(ModelKind::pirnn, ModelConfig::desk());
  const ParamStore params = make_params(model->schema(), 1);
  std::vector<std::vector<FrameTruth>> truth;
  for (const auto& s : scenes) truth.push_back(s.truth());
  LossConfig loss;
  for (auto _ : state) {
    std::vector<Carry> carries(scenes.size());
    std::vector<parallel::ChunkJob> jobs;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      jobs.push_back({std::span<const Tensor>(scenes[i].detections).subspan(0, 50),
                      std::span<const FrameTruth>(truth[i]).subspan(0, 50), &carries[i]});
    }
    benchmark::DoNotOptimize(parallel::batch_gradient(*model, params, jobs, loss, exec_of(state)));
  }
}

void BM_run_scenes(benchmark::State& state) {
  const auto scenes = parallel::generate_dataset(bench_sim(), 8, parallel::Execution::serial);
  const auto model = make_model(ModelKind::pirnn, ModelConfig::desk());
  const ParamStore params = make_params(model->schema(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(parallel::run_scenes(*model, params, scenes, exec_of(state)));
}

void shapes(benchmark::internal::Benchmark* b) {
  for (int n : {32, 64, 128, 256}) b->Args({n, 10})->Args({n, 256});
}

}  // namespace

BENCHMARK(BM_gemm_nn<true>)->Apply(shapes)->Name("gemm_nn/reference");
BENCHMARK(BM_gemm_nn<false>)->Apply(shapes)->Name("gemm_nn/blocked");
BENCHMARK(BM_gemm_nt<true>)->Apply(shapes)->Name("gemm_nt/reference");
BENCHMARK(BM_gemm_nt<false>)->Apply(shapes)->Name("gemm_nt/blocked");
BENCHMARK(BM_generate_dataset)->ArgName("openmp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_gradient)->ArgName("openmp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_run_scenes)->ArgName("openmp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
