#include <benchmark/benchmark.h>

#include <random>

#include "radsync/collective.hpp"
#include "radsync/cumulant.hpp"
#include "radsync/master_exact.hpp"
#include "radsync/meanfield.hpp"
#include "radsync/observables.hpp"
#include "radsync/trajectories.hpp"

using namespace radsync;

namespace {

void bench_kernels(benchmark::State& state) {
  double acc = 0, z = 0.011;
  for (auto _ : state) {
    acc += kernel_f(z, 0.4, 1.0) + kernel_g(z, 0.4, 1.0);
    z = z < 20.0 ? z * 1.01 : 0.011;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(bench_kernels);

void bench_mf_rhs(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto arr = DipoleArray::uniform(n);
  auto cm = mean_field_all_to_all(n, 15.0);
  BlochState s = BlochState::random_phases(n, 3), d = BlochState::zero(n);
  for (auto _ : state) {
    mf_derivatives(s, cm, 6.5, arr, d);
    benchmark::DoNotOptimize(d.sx.data());
  }
}
BENCHMARK(bench_mf_rhs)->Arg(64)->Arg(200);

void bench_liouvillian_apply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto arr = build_chain(n, 0.08, kMagicAngle);
  auto cm = coupling_matrices(arr, {CouplingMode::dipolar, 0, 0, 0});
  Liouvillian liouv(arr, cm, 2.0);
  DensityMatrix rho = all_down_density(n), out;
  for (auto _ : state) {
    liouv.apply(rho, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(bench_liouvillian_apply)->Arg(4)->Arg(6)->Arg(8);

void bench_symmetric_apply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SymmetricGenerator gen(n, 15.0, 7.5);
  Eigen::VectorXd d = gen.all_down(), out(gen.dim());
  for (auto _ : state) {
    gen.apply(d, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(bench_symmetric_apply)->Arg(30)->Arg(70);

void bench_cumulant_u1_rhs(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto arr = build_lattice({1, n}, 0.08, {0, 0, 1});
  auto cm = coupling_matrices(arr, {CouplingMode::powerlaw, 0, 0.5, 0.25});
  CumulantOptions co;
  co.u1_reduction = true;
  std::vector<double> grid{0.05};
  for (auto _ : state) {
    auto series = evolve_cumulant(CumulantState::all_down(n), cm, 4.0, arr, grid, co);
    benchmark::DoNotOptimize(series.states.back().s.data());
  }
}
BENCHMARK(bench_cumulant_u1_rhs)->Arg(64)->Unit(benchmark::kMillisecond);

void bench_krylov_segment(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto arr = build_chain(n, 0.08, kMagicAngle);
  auto cm = coupling_matrices(arr, {CouplingMode::dipolar, 0, 0, 0});
  DriftOperator drift(arr, cm, 2.5);
  KrylovPropagator prop(drift, 24, 1e-9);
  PureState psi = all_down_pure(n);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < psi.size(); ++i) psi[i] += std::complex<double>(g(rng), g(rng)) * 0.1;
  psi.normalize();
  PureState out;
  for (auto _ : state) {
    double tau = prop.start_segment(psi, 0.05);
    prop.eval_at(tau, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(bench_krylov_segment)->Arg(10)->Arg(12)->Unit(benchmark::kMicrosecond);

void bench_discord(benchmark::State& state) {
  SymmetricGenerator gen(20, 12.0, 6.0);
  auto ps = gen.reduced_pair_state(steady_symmetric(gen).d);
  for (auto _ : state) {
    auto d = quantum_discord(ps);
    benchmark::DoNotOptimize(d.discord);
  }
}
BENCHMARK(bench_discord)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
