// Microbenchmarks for the numerical kernels: jet evaluation, the Jacobi
// eigensolver, Newton refinement, and horizontal transport.

#include <benchmark/benchmark.h>

#include "wlab/critfind.hpp"
#include "wlab/fibration.hpp"
#include "wlab/geometry.hpp"
#include "wlab/rng.hpp"
#include "wlab/scene.hpp"

using namespace wlab;

namespace {

ChartPoint sample_point(const Scene& sc, Rng& rng) {
  ChartPoint p{rng.uniform_int(sc.num_charts()), Vec(sc.dim_real())};
  for (auto& c : p.coords) c = rng.uniform(-0.6, 0.6);
  return p;
}

void BM_phi_jet(benchmark::State& state, const char* name, int n) {
  Scene sc = builtin_scene(name, {.n = n});
  Rng rng(1);
  ChartPoint p = sample_point(sc, rng);
  for (auto _ : state) {
    Jet2 jet = eval_jet2(sc, p, 0.1);
    benchmark::DoNotOptimize(jet.value);
  }
}

void BM_symplectic_sample(benchmark::State& state) {
  Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
  Rng rng(2);
  ChartPoint p = sample_point(sc, rng);
  for (auto _ : state) {
    SymplecticSample s = symplectic_sample(sc, p, 0.1);
    benchmark::DoNotOptimize(s.liouville.data());
  }
}

void BM_jacobi(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    Spectrum sp = jacobi_spectrum(m);
    benchmark::DoNotOptimize(sp.eigenvalues.data());
  }
}

void BM_newton_refine(benchmark::State& state) {
  Scene sc = builtin_scene("cpn_x_cpn", {.n = 2});
  for (auto _ : state) {
    ChartPoint seed{4, Vec{0.2, -0.1, 0.15, 0.05, -0.2, 0.1, 0.05, -0.15}};
    auto p = newton_refine(sc, seed, 0.05);
    benchmark::DoNotOptimize(p.has_value());
  }
}

void BM_transport(benchmark::State& state) {
  Scene sc = builtin_scene("local_nc", {.n = 2});
  double t0 = 1e-3;
  double s = std::sqrt(t0);
  TransportState start{{0, Vec{s, 0.0, s, 0.0}}, t0, 0.0};
  for (auto _ : state) {
    TransportState end = transport(sc, start, 0.04, 0.04);
    benchmark::DoNotOptimize(end.point.coords.data());
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_phi_jet, local_nc_n2, "local_nc", 2);
BENCHMARK_CAPTURE(BM_phi_jet, cpn_o2h_n3, "cpn_o2h", 3);
BENCHMARK_CAPTURE(BM_phi_jet, cpn_x_cpn_n2, "cpn_x_cpn", 2);
BENCHMARK(BM_symplectic_sample);
BENCHMARK(BM_jacobi)->Arg(4)->Arg(8)->Arg(12);
BENCHMARK(BM_newton_refine);
BENCHMARK(BM_transport);

BENCHMARK_MAIN();
