#include <benchmark/benchmark.h>

#include <random>

#include "asvp/asvp.hpp"
#include "asvp/defenses.hpp"

namespace {

asvp::Matrix random_matrix(Eigen::Index m, Eigen::Index n) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> d;
  asvp::Matrix x(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) x(i, j) = d(rng);
  return x;
}

asvp::Tensor random_feature(std::size_t channels, std::size_t size) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  asvp::Tensor t({1, channels, size, size});
  for (double& v : t.data()) v = d(rng);
  return t;
}

void BM_Svd(benchmark::State& state) {
  const asvp::Matrix x = random_matrix(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(asvp::svd(x));
}
BENCHMARK(BM_Svd)->Args({256, 16})->Args({256, 64})->Args({1024, 16})->Args({4096, 16});

void BM_AsvpFull(benchmark::State& state) {
  const asvp::Matrix x = random_matrix(state.range(0), state.range(1));
  const asvp::AsvpConfig cfg{100.0, 0.4, asvp::AsvpMode::full};
  for (auto _ : state) benchmark::DoNotOptimize(asvp::perturb_matrix_full(x, cfg));
}
BENCHMARK(BM_AsvpFull)->Args({256, 64})->Args({1024, 16})->Args({16384, 16});

void BM_AsvpTruncated(benchmark::State& state) {
  const asvp::Matrix x = random_matrix(state.range(0), state.range(1));
  const asvp::AsvpConfig cfg{100.0, 0.4, asvp::AsvpMode::truncated};
  for (auto _ : state) benchmark::DoNotOptimize(asvp::perturb_matrix_truncated(x, cfg));
}
BENCHMARK(BM_AsvpTruncated)->Args({256, 64})->Args({1024, 16})->Args({16384, 16});

// small k relative to the short side keeps the iterative eigen-solver busy
void BM_AsvpTruncatedSmallK(benchmark::State& state) {
  const asvp::Matrix x = random_matrix(state.range(0), state.range(1));
  const asvp::AsvpConfig cfg{100.0, 0.05, asvp::AsvpMode::truncated};
  for (auto _ : state) benchmark::DoNotOptimize(asvp::perturb_matrix_truncated(x, cfg));
}
BENCHMARK(BM_AsvpTruncatedSmallK)->Args({1024, 128})->Args({4096, 256});

void BM_Defense(benchmark::State& state, const char* preset) {
  const asvp::Tensor x = random_feature(16, static_cast<std::size_t>(state.range(0)));
  const asvp::DefenseSpec spec = asvp::DefenseSpec::preset(preset);
  std::uint64_t salt = 0;
  for (auto _ : state) benchmark::DoNotOptimize(asvp::apply_defense(spec, x, nullptr, salt++));
}
BENCHMARK_CAPTURE(BM_Defense, none, "none")->Arg(32)->Arg(128);
BENCHMARK_CAPTURE(BM_Defense, noise, "noise-L")->Arg(32)->Arg(128);
BENCHMARK_CAPTURE(BM_Defense, dropC, "dropC-L")->Arg(32)->Arg(128);
BENCHMARK_CAPTURE(BM_Defense, asvp, "asvp")->Arg(32)->Arg(128);
BENCHMARK_CAPTURE(BM_Defense, asvp_truncated, "asvp-truncated")->Arg(32)->Arg(128);

}  // namespace
