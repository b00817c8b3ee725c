#include <doctest.h>

#include <cmath>
#include <limits>

#include "wot/density.hpp"
#include "wot/entropic.hpp"
#include "wot/error.hpp"
#include "wot/kernels.hpp"

using namespace wot;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }

DiscreteMeasure point(double x) {
  DiscreteMeasure m;
  m.points = Mat::Constant(1, 1, x);
  m.masses = {1.0};
  return m;
}

std::pair<Vec, Vec> marginals(const SinkhornState& st, const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const auto n = mu.size(), m = nu.size();
  Vec row = Vec::Zero(static_cast<Eigen::Index>(n)), col = Vec::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double c = 0.5 * (mu.points.col(i) - nu.points.col(j)).squaredNorm();
      const double p = mu.masses[i] * nu.masses[j] * std::exp((st.u[i] + st.v[j] - c) / st.epsilon);
      row[static_cast<Eigen::Index>(i)] += p;
      col[static_cast<Eigen::Index>(j)] += p;
    }
  return {row, col};
}
}  // namespace

TEST_SUITE("transport-entropic") {
  TEST_CASE("discretize: reference masses are the quadrature weights") {
    const auto g = make_grid(GridSpec{GridScheme::GaussHermiteTensor, 1, 12});
    const auto m = discretize(PotentialDensity::reference(1), *g);
    for (std::size_t i = 0; i < g->size(); ++i) CHECK(m.masses[i] == doctest::Approx(g->weights()[i]).epsilon(1e-14));
  }

  TEST_CASE("discretize: mean-shift barycenter") {
    const auto g = make_mesh(1, 241, 8.0);
    const auto m = discretize(PotentialDensity::mean_shift(v1(1.0)), *g);
    double bary = 0.0, total = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
      bary += m.masses[i] * g->node(i)[0];
      total += m.masses[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(std::abs(bary - 1.0) < 1e-3);
  }

  TEST_CASE("a density without mass is rejected") {
    const MeshSpec mesh{1, 11, 2.0};
    CHECK_THROWS_AS(PotentialDensity::tabulated(mesh, std::vector<double>(11, std::numeric_limits<double>::infinity())),
                    Error);
  }

  TEST_CASE("singleton coupling") {
    const auto mu = point(0.0), nu = point(1.0);
    const auto st = sinkhorn(mu, nu, 0.1, 1e-12, 100);
    CHECK(st.converged);
    const auto sum = summarize_coupling(st, mu, nu);
    CHECK(sum.transport_cost == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(st.u[0] + st.v[0] == doctest::Approx(0.5).epsilon(1e-10));
  }

  TEST_CASE("marginals are feasible and checkpoints nonincreasing") {
    const auto grid = make_mesh(1, 81, 5.0);
    const auto mu = discretize(PotentialDensity::reference(1), *grid);
    const auto nu = discretize(PotentialDensity::gaussian(v1(0.5), Mat::Constant(1, 1, 0.5)), *grid);
    SinkhornOptions opts;
    opts.checkpoint_every = 5;
    const auto st = sinkhorn(mu, nu, 0.05, 1e-10, 20000, opts);
    REQUIRE(st.converged);
    const auto [row, col] = marginals(st, mu, nu);
    for (std::size_t i = 0; i < mu.size(); ++i) CHECK(std::abs(row[static_cast<Eigen::Index>(i)] - mu.masses[i]) < 1e-9);
    for (std::size_t j = 0; j < nu.size(); ++j) CHECK(std::abs(col[static_cast<Eigen::Index>(j)] - nu.masses[j]) < 1e-9);
    for (std::size_t k = 1; k < st.checkpoints.size(); ++k) CHECK(st.checkpoints[k].second <= st.checkpoints[k - 1].second * (1 + 1e-12));
  }

  TEST_CASE("dense and separable-mesh kernels agree; serial and parallel are bit-identical") {
    const auto grid = make_mesh(2, 15, 4.0);
    Mat S(2, 2);
    S << 1.0, 0.3, 0.3, 0.5;
    const auto mu = discretize(PotentialDensity::reference(2), *grid);
    const auto nu = discretize(PotentialDensity::gaussian(Vec::Zero(2), S), *grid);
    SinkhornOptions dense, meshk, serial;
    dense.kernel = SinkhornKernel::Dense;
    meshk.kernel = SinkhornKernel::Mesh;
    serial.kernel = SinkhornKernel::Mesh;
    serial.parallel = false;
    const auto a = sinkhorn(mu, nu, 0.2, 1e-10, 5000, dense);
    const auto b = sinkhorn(mu, nu, 0.2, 1e-10, 5000, meshk);
    const auto c = sinkhorn(mu, nu, 0.2, 1e-10, 5000, serial);
    CHECK((a.u - b.u).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(b.u == c.u);
    CHECK(b.v == c.v);
    const auto again = sinkhorn(mu, nu, 0.2, 1e-10, 5000, meshk);
    CHECK(again.u == b.u);
  }

  TEST_CASE("kernels: serial reference matches the OpenMP version") {
    const MeshSpec mesh{2, 21, 3.0};
    const auto n = static_cast<Eigen::Index>(mesh.size());
    Vec g(n), logw(n), out_p(n), out_s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      g[i] = std::sin(0.37 * static_cast<double>(i));
      logw[i] = -0.01 * static_cast<double>(i % 17);
    }
    kernels::softmin_mesh(mesh, g, logw, 0.3, out_p);
    kernels::serial::softmin_mesh(mesh, g, logw, 0.3, out_s);
    CHECK(out_p == out_s);
    Mat vals(2, n), d_p, d_s;
    for (Eigen::Index i = 0; i < n; ++i) {
      vals(0, i) = std::cos(0.11 * static_cast<double>(i));
      vals(1, i) = 0.5 * static_cast<double>(i * i % 13);
    }
    for (int axis = 0; axis < 2; ++axis) {
      kernels::fd_second(mesh, vals, axis, d_p);
      kernels::serial::fd_second(mesh, vals, axis, d_s);
      CHECK(d_p == d_s);
      kernels::fd_first(mesh, vals, axis, d_p);
      kernels::serial::fd_first(mesh, vals, axis, d_s);
      CHECK(d_p == d_s);
    }
  }

  TEST_CASE("extrapolation of exactly linear costs") {
    const auto e = epsilon_extrapolate({{0.1, 1.3}, {0.2, 1.6}, {0.4, 2.2}});
    CHECK(e.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.slope == doctest::Approx(3.0).epsilon(1e-12));
    CHECK_THROWS_AS(epsilon_extrapolate({{0.1, 1.0}}), Error);
  }

  TEST_CASE("Gaussian pair cost within 2% of Bures after extrapolation") {
    const auto grid = make_mesh(1, 161, 6.0);
    const auto r = solve_entropic(PotentialDensity::reference(1),
                                  PotentialDensity::gaussian(v1(0.0), Mat::Constant(1, 1, 0.25)), grid);
    CHECK(std::abs(r.solution.cost - 0.25) / 0.25 < 0.02);
    CHECK(r.steps.size() == 3);
    const auto csv = entropic_diagnostics_csv(r);
    CHECK(csv.find("epsilon") != std::string::npos);
  }

  TEST_CASE("identical marginals: potentials near zero, cost near zero") {
    const auto grid = make_mesh(1, 121, 6.0);
    const auto r = solve_entropic(PotentialDensity::reference(1), PotentialDensity::reference(1), grid);
    CHECK(std::abs(r.solution.cost) < 5e-3);
    const auto m = discretize(PotentialDensity::reference(1), *grid);
    double l2 = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) l2 += m.masses[i] * r.solution.phi[i] * r.solution.phi[i];
    CHECK(std::sqrt(l2) < 5e-3);
  }

  TEST_CASE("translation: gradient of phi is the shift") {
    const auto grid = make_mesh(1, 161, 7.0);
    const auto r = solve_entropic(PotentialDensity::reference(1), PotentialDensity::mean_shift(v1(1.0)), grid);
    const auto m = discretize(PotentialDensity::reference(1), *grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
      const double x = grid->node(i)[0];
      if (std::abs(x) > 3) continue;
      worst = std::max(worst, std::abs(r.solution.T(0, static_cast<Eigen::Index>(i)) - x - 1.0));
    }
    CHECK(worst < 5e-2);
  }
}
