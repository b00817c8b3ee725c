#include <benchmark/benchmark.h>

#include <cmath>

#include "wot/density.hpp"
#include "wot/entropic.hpp"
#include "wot/kernels.hpp"
#include "wot/oracles.hpp"

using namespace wot;

namespace {

struct MeshData {
  MeshSpec mesh;
  Vec g, logw;
};

MeshData mesh_data(int dim, int points) {
  MeshData d{MeshSpec{dim, points, 6.0}, {}, {}};
  const auto n = static_cast<Eigen::Index>(d.mesh.size());
  d.g.resize(n);
  d.logw.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.g[i] = std::sin(0.01 * static_cast<double>(i));
    d.logw[i] = -0.5 * std::pow(std::fmod(0.37 * static_cast<double>(i), 6.0), 2);
  }
  return d;
}

void BM_SoftminMesh(benchmark::State& state) {
  const auto d = mesh_data(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  Vec out;
  for (auto _ : state) {
    kernels::softmin_mesh(d.mesh, d.g, d.logw, 0.05, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_SoftminMeshSerial(benchmark::State& state) {
  const auto d = mesh_data(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  Vec out;
  for (auto _ : state) {
    kernels::serial::softmin_mesh(d.mesh, d.g, d.logw, 0.05, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_SoftminDense(benchmark::State& state) {
  const auto grid = make_mesh(1, static_cast<int>(state.range(0)), 6.0);
  const auto d = mesh_data(1, static_cast<int>(state.range(0)));
  Vec out;
  for (auto _ : state) {
    kernels::softmin_dense(grid->nodes(), grid->nodes(), d.g, d.logw, 0.05, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_SoftminDenseSerial(benchmark::State& state) {
  const auto grid = make_mesh(1, static_cast<int>(state.range(0)), 6.0);
  const auto d = mesh_data(1, static_cast<int>(state.range(0)));
  Vec out;
  for (auto _ : state) {
    kernels::serial::softmin_dense(grid->nodes(), grid->nodes(), d.g, d.logw, 0.05, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_FdSecond(benchmark::State& state) {
  const MeshSpec mesh{2, static_cast<int>(state.range(0)), 6.0};
  Mat values = Mat::Random(4, static_cast<Eigen::Index>(mesh.size()));
  Mat out;
  for (auto _ : state) {
    kernels::fd_second(mesh, values, 1, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_FdSecondSerial(benchmark::State& state) {
  const MeshSpec mesh{2, static_cast<int>(state.range(0)), 6.0};
  Mat values = Mat::Random(4, static_cast<Eigen::Index>(mesh.size()));
  Mat out;
  for (auto _ : state) {
    kernels::serial::fd_second(mesh, values, 1, out);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_Sinkhorn2D(benchmark::State& state) {
  const auto grid = make_mesh(2, static_cast<int>(state.range(0)), 6.0);
  const auto mu = discretize(PotentialDensity::reference(2), *grid);
  const auto nu = discretize(PotentialDensity::mean_shift((Vec(2) << 0.5, -0.5).finished()), *grid);
  SinkhornOptions opts;
  opts.parallel = state.range(1) != 0;
  for (auto _ : state) {
    const auto st = sinkhorn(mu, nu, 0.1, 1e-9, 5000, opts);
    benchmark::DoNotOptimize(st.u.data());
  }
}

void BM_QuantileMap(benchmark::State& state) {
  const auto g = make_grid(GridSpec{GridScheme::GaussHermiteTensor, 1, 200});
  const auto rho = normalize(PotentialDensity::separable({Polynomial1D{{0, 0.3, 0, 0, 0.08}}}), *g);
  const auto nu = PotentialDensity::gaussian(Vec::Zero(1), Mat::Constant(1, 1, 0.25));
  for (auto _ : state) benchmark::DoNotOptimize(quantile_map(rho, nu)->cost());
}

}  // namespace

BENCHMARK(BM_SoftminMesh)->Args({1, 2001})->Args({2, 121})->Args({3, 41})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SoftminMeshSerial)->Args({1, 2001})->Args({2, 121})->Args({3, 41})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SoftminDense)->Arg(1001)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SoftminDenseSerial)->Arg(1001)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FdSecond)->Arg(401)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FdSecondSerial)->Arg(401)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Sinkhorn2D)->Args({41, 1})->Args({41, 0})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QuantileMap)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
