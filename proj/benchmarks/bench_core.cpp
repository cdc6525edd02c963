#include <benchmark/benchmark.h>

#include "acl/data.hpp"
#include "acl/eval.hpp"
#include "acl/matrix.hpp"
#include "acl/trainer.hpp"
#include "acl/weighting.hpp"

namespace {

using namespace acl;

Matrix filled(std::size_t r, std::size_t c, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

// Encoder-shaped products: batch x features times features x hidden.
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto m = static_cast<std::size_t>(state.range(2));
  const Matrix a = filled(n, k, 1), b = filled(k, m, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * k * m));
}
BENCHMARK(BM_Matmul)->Args({128, 64, 1000})->Args({128, 1000, 20})->Args({128, 1000, 1000});

void BM_MatmulAtB(benchmark::State& state) {
  const Matrix a = filled(128, 64, 1), b = filled(128, 1000, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_at_b(a, b));
}
BENCHMARK(BM_MatmulAtB);

struct Problem {
  DomainDataset source, target;
  Problem() {
    SynthSpec spec;
    auto [s, t] = generate_synthetic_pda(spec);
    source = std::move(s);
    target = std::move(t);
  }
};

const Problem& problem() {
  static const Problem p;
  return p;
}

// One full optimizer iteration at the default configuration.
void BM_TrainStep(benchmark::State& state) {
  const Problem& p = problem();
  TrainConfig c;
  c.iterations = 1u << 30;
  TrainState s = init_train_state(p.source, p.target, c);
  std::size_t next = 0;
  for (auto _ : state) run_training(s, p.source, p.target, ++next);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const Problem& p = problem();
  TrainState s = init_train_state(p.source, p.target, TrainConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(predict(s.model, p.target.features));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.target.size()));
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMillisecond);

void BM_EstimateClassWeights(benchmark::State& state) {
  const Problem& p = problem();
  TrainState s = init_train_state(p.source, p.target, TrainConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(estimate_class_weights(s.model, p.target.features));
}
BENCHMARK(BM_EstimateClassWeights)->Unit(benchmark::kMillisecond);

void BM_DomainDiagnostics(benchmark::State& state) {
  const Problem& p = problem();
  TrainState s = init_train_state(p.source, p.target, TrainConfig{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(domain_diagnostics(s.model, p.source.features, p.target.features));
  }
}
BENCHMARK(BM_DomainDiagnostics)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
