#include "starsee/optimizer.hpp"

#include <benchmark/benchmark.h>

using namespace starsee;

namespace {

Problem desk(int N, int M, double kappa_sq) {
  SystemParams p;
  p.N = N;
  p.M = M;
  p.J_r = 1;
  p.J_t = 1;
  return Problem::normalized(generate_realization(p, Geometry{}, UncertaintyConfig::uniform_sq(kappa_sq), 3), p,
                             Protocol::ES);
}

void BM_ActiveBlock(benchmark::State& st) {
  const Problem pr = desk(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)), 0.1);
  const BeamformingState s = init_state(pr, 1);
  const Slacks sl = conservative_slacks(pr, s);
  for (auto _ : st)
    benchmark::DoNotOptimize(
        solve_block(pr, s, sl, Block::Active, Goal::Restore, nullptr, AOConfig::default_solver()).objective);
}
BENCHMARK(BM_ActiveBlock)->Args({2, 4})->Args({3, 8})->Args({5, 12})->Unit(benchmark::kMillisecond);

void BM_PassiveBlock(benchmark::State& st) {
  const Problem pr = desk(static_cast<int>(st.range(0)), static_cast<int>(st.range(1)), 0.1);
  const BeamformingState s = init_state(pr, 1);
  const Slacks sl = conservative_slacks(pr, s);
  PenaltyState pen;
  for (int k = 0; k < 2; ++k) pen.ms_target[k] = s.beta(k);
  for (auto _ : st)
    benchmark::DoNotOptimize(
        solve_block(pr, s, sl, Block::Passive, Goal::Restore, &pen, AOConfig::default_solver()).objective);
}
BENCHMARK(BM_PassiveBlock)->Args({2, 4})->Args({3, 8})->Unit(benchmark::kMillisecond);

void BM_PerfectCsiRun(benchmark::State& st) {
  const Problem pr = desk(3, 8, 0.0);
  AOConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(ao_run(pr, cfg).report.see);
}
BENCHMARK(BM_PerfectCsiRun)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_OracleSamples(benchmark::State& st) {
  const Problem pr = desk(3, 8, 0.1);
  const BeamformingState s = init_state(pr, 1);
  const auto ineq = certified_inequalities(pr, s, conservative_slacks(pr, s));
  for (auto _ : st) benchmark::DoNotOptimize(robust::implication_oracle(ineq.front(), 1000, 1).worst);
}
BENCHMARK(BM_OracleSamples)->Unit(benchmark::kMillisecond);

void BM_HermitianEmbedding(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  CMat a = CMat::Random(n, n);
  a = a + a.adjoint().eval();
  for (auto _ : st) benchmark::DoNotOptimize(conic::embed_hermitian(a).sum());
}
BENCHMARK(BM_HermitianEmbedding)->Arg(8)->Arg(64);

void BM_ComplexityEstimate(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(complexity_estimate(5, 20, 2, 2).o_phi);
}
BENCHMARK(BM_ComplexityEstimate);

}  // namespace

BENCHMARK_MAIN();
