// Parallel kernels against their serial references, plus the batched VAE
// backward pass against the per-example reference.

#include <benchmark/benchmark.h>

#include "sigvae/kernels.hpp"
#include "sigvae/parallel.hpp"
#include "sigvae/rng.hpp"
#include "sigvae/vae.hpp"

using namespace sigvae;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(-1, 1);
  return m;
}

void BM_matmul_parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b));
  state.counters["threads"] = max_threads();
}

void BM_matmul_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::matmul(a, b));
}

void BM_matmul_tn_parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 3), b = random_matrix(n, n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul_tn(a, b));
}

void BM_matmul_tn_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 3), b = random_matrix(n, n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::matmul_tn(a, b));
}

void BM_pairwise_parallel(benchmark::State& state) {
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 64, 5);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::pairwise_sq_dists(x));
}

void BM_pairwise_serial(benchmark::State& state) {
  const Matrix x = random_matrix(static_cast<std::size_t>(state.range(0)), 64, 5);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::pairwise_sq_dists(x));
}

struct BackwardFixture {
  vae::VaeParams params;
  Matrix batch;
  Matrix eps;

  BackwardFixture() {
    vae::VaeConfig cfg;
    cfg.input_dim = 32 * 32;
    cfg.intermediate_dim = 256;
    cfg.latent_dim = 32;
    Rng rng(6);
    params = vae::init_params(cfg, rng);
    batch = random_matrix(32, cfg.input_dim, 7);
    for (double& v : batch.data()) v = 0.5 * (v + 1.0);
    eps = Matrix(32, cfg.latent_dim, sample_standard_normal(rng, 32 * cfg.latent_dim));
  }
};

void BM_backward_batched(benchmark::State& state) {
  const BackwardFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(vae::backward(f.params, f.batch, f.eps, 1.0));
}

void BM_backward_reference(benchmark::State& state) {
  const BackwardFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(vae::backward_reference(f.params, f.batch, f.eps, 1.0));
}

}  // namespace

BENCHMARK(BM_matmul_parallel)->Arg(64)->Arg(256);
BENCHMARK(BM_matmul_serial)->Arg(64)->Arg(256);
BENCHMARK(BM_matmul_tn_parallel)->Arg(256);
BENCHMARK(BM_matmul_tn_serial)->Arg(256);
BENCHMARK(BM_pairwise_parallel)->Arg(500);
BENCHMARK(BM_pairwise_serial)->Arg(500);
BENCHMARK(BM_backward_batched)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_backward_reference)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  apply_thread_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
