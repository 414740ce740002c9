#include <benchmark/benchmark.h>

#include "vtolmpc/sim_harness.hpp"

using namespace vtolmpc;

namespace {

FlatState start_state() {
  FlatState z;
  z.z(0) = 7.0;
  z.z(4) = 7.0;
  return z;
}

ExtendedState tilted() {
  ExtendedState x = ExtendedState::hover(BodyParams{}, {1.0, 2.0, 3.0}, 0.3);
  x.rigid.eulers = Eigen::Vector3d(0.2, -0.1, 0.3);
  x.rigid.euler_rates = Eigen::Vector3d(0.4, -0.2, 0.1);
  x.rigid.v = Eigen::Vector3d(1.0, -0.5, 0.2);
  x.thrust_rate = 0.7;
  return x;
}

void BM_Rk4Step(benchmark::State& state) {
  const BodyParams params;
  const ExtendedState x = tilted();
  const ExtendedInput u{1.0, 0.1, -0.1, 0.05};
  for (auto _ : state) benchmark::DoNotOptimize(rk4_step(x, u, 0.05, params));
}
BENCHMARK(BM_Rk4Step);

void BM_DflControl(benchmark::State& state) {
  const BodyParams params;
  const ExtendedState x = tilted();
  const VirtualInput v{0.5, -1.0, 2.0, 0.3};
  for (auto _ : state) benchmark::DoNotOptimize(dfl_control(x, v, params));
}
BENCHMARK(BM_DflControl);

void BM_BuildQcqp(benchmark::State& state) {
  MpcConfig cfg = MpcConfig::defaults();
  cfg.horizon = static_cast<int>(state.range(0));
  cfg.check_horizon = cfg.horizon;
  const std::vector<Obstacle> obstacles{{{3.5, 3.2, 0.0}, 1.0}};
  const FlatState z0 = start_state();
  for (auto _ : state) benchmark::DoNotOptimize(build_qcqp(z0, cfg, obstacles));
}
BENCHMARK(BM_BuildQcqp)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMicrosecond);

void BM_SolveQcqp(benchmark::State& state) {
  MpcConfig cfg = MpcConfig::defaults();
  cfg.horizon = static_cast<int>(state.range(0));
  cfg.check_horizon = cfg.horizon;
  MpcProblem p = build_qcqp(start_state(), cfg, {{{3.5, 3.2, 0.0}, 1.0}});
  drop_fixed_rows(p.qcqp);
  for (auto _ : state) benchmark::DoNotOptimize(solve(p.qcqp));
}
BENCHMARK(BM_SolveQcqp)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_ClosedLoopSecond(benchmark::State& state) {
  Scenario s = Scenario::sphere_midmap();
  s.duration = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(run_closed_loop(s));
}
BENCHMARK(BM_ClosedLoopSecond)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
