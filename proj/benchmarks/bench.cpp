// Microbenchmarks for the training hot path: dense kernels, single cell
// steps, and full BPTT over one sequence.

#include <benchmark/benchmark.h>

#include "rgate/engine.hpp"

using namespace rgate;

namespace {

CellConfig bench_cfg(Arch arch, std::size_t hidden, RefineMode mode) {
  CellConfig cfg;
  cfg.arch = arch;
  cfg.input_size = hidden;
  cfg.hidden_size = hidden;
  cfg.refine_mode = mode;
  if (mode != RefineMode::None) {
    if (arch == Arch::Lstm) cfg.refined_gates.output = true;
    if (arch == Arch::Gru) cfg.refined_gates.reset = true;
    if (arch == Arch::Mgu) cfg.refined_gates.forget = true;
  }
  return cfg;
}

void fill_random(Vec& v, Rng& rng) {
  for (auto& e : v) e = rng.uniform(-1, 1);
}

}  // namespace

static void BM_Matvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix a = init_xavier(n, n, rng);
  Vec x(n), out(n);
  fill_random(x, rng);
  for (auto _ : state) {
    matvec(a, x, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * n * n);
}
BENCHMARK(BM_Matvec)->Arg(32)->Arg(128)->Arg(512);

static void BM_MatvecTAcc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Matrix a = init_xavier(n, n, rng);
  Vec x(n), out(n, 0.0);
  fill_random(x, rng);
  for (auto _ : state) {
    matvec_t_acc(a, x, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * n * n);
}
BENCHMARK(BM_MatvecTAcc)->Arg(32)->Arg(128)->Arg(512);

static void BM_CellStep(benchmark::State& state) {
  const Arch arch = static_cast<Arch>(state.range(0));
  const auto hidden = static_cast<std::size_t>(state.range(1));
  const RefineMode mode = state.range(2) ? RefineMode::Add : RefineMode::None;
  const CellConfig cfg = bench_cfg(arch, hidden, mode);
  Rng rng(3);
  const CellParams p = init_params(cfg, rng);
  Vec x(hidden), h(hidden, 0.0), c(hidden, 0.0);
  fill_random(x, rng);
  StepCache cache;
  for (auto _ : state) {
    step_forward(p, cfg, x, h, c, cache);
    benchmark::DoNotOptimize(cache.h.data());
  }
}
BENCHMARK(BM_CellStep)
    ->Args({0, 128, 0})
    ->Args({0, 128, 1})
    ->Args({1, 128, 0})
    ->Args({1, 128, 1})
    ->Args({2, 128, 0})
    ->Args({2, 128, 1});

static void BM_SampleBptt(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const CellConfig cfg = bench_cfg(Arch::Lstm, 64, RefineMode::Add);
  Rng rng(4);
  Model m = init_model(cfg, 2, LossKind::PerStep, rng);
  SeqSample s;
  s.inputs.resize(T);
  s.targets.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    s.inputs[t].resize(64);
    fill_random(s.inputs[t], rng);
    s.targets[t] = static_cast<int>(rng.next_below(2));
  }
  GradStore g = zeros_like(m);
  for (auto _ : state) {
    g.zero();
    const double loss = sample_loss(m, s, &g);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * T);
}
BENCHMARK(BM_SampleBptt)->Arg(50)->Arg(100);

BENCHMARK_MAIN();
