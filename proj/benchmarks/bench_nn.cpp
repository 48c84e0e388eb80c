#include <benchmark/benchmark.h>

#include <random>

#include "asvp/nn.hpp"

namespace {

asvp::Tensor random_tensor(asvp::Shape dims) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  asvp::Tensor t(std::move(dims));
  for (double& v : t.data()) v = u(rng);
  return t;
}

void BM_ConvForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto size = static_cast<std::size_t>(state.range(1));
  const asvp::ConvShape shape{c, c, 3};
  const asvp::Tensor x = random_tensor({16, c, size, size});
  const std::vector<double> w(shape.weight_count(), 0.01), b(c, 0.0);
  asvp::Tensor y;
  for (auto _ : state) {
    asvp::conv2d_forward(x, w, b, shape, y);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_ConvForward)->Args({16, 32})->Args({16, 64});

void BM_ConvBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto size = static_cast<std::size_t>(state.range(1));
  const asvp::ConvShape shape{c, c, 3};
  const asvp::Tensor x = random_tensor({16, c, size, size});
  const asvp::Tensor dy = random_tensor({16, c, size, size});
  const std::vector<double> w(shape.weight_count(), 0.01);
  std::vector<double> dw(w.size()), db(c);
  asvp::Tensor dx;
  for (auto _ : state) {
    asvp::conv2d_backward(x, w, dy, shape, dw, db, &dx);
    benchmark::DoNotOptimize(dx.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_ConvBackward)->Args({16, 32})->Args({16, 64});

void BM_TrainStep(benchmark::State& state) {
  asvp::NetworkArch arch;
  arch.blocks = static_cast<std::size_t>(state.range(0));
  const asvp::Network net = asvp::init_network(arch, 1);
  const asvp::Tensor x = random_tensor({16, 1, 32, 32});
  const asvp::Tensor target = random_tensor({16, 1, 32, 32});
  const asvp::Objective obj = [&](const asvp::Network&, const asvp::ForwardOutput& f, asvp::LossGradients& g) {
    return asvp::l1_loss(f.output, target, &g.d_output);
  };
  for (auto _ : state) benchmark::DoNotOptimize(asvp::value_and_grad(net, x, obj));
}
BENCHMARK(BM_TrainStep)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
