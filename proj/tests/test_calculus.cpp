#include <doctest.h>

#include <cmath>
#include <random>

#include "wot/calculus.hpp"
#include "wot/density.hpp"
#include "wot/identities.hpp"

using namespace wot;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }

double max_interior_error(const FieldOnGrid& field, const std::function<double(double)>& exact, int shells = 2) {
  const auto mask = interior_mask(*field.grid(), shells);
  double worst = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i)
    if (mask[i]) worst = std::max(worst, std::abs(field.scalar(i) - exact(field.grid()->node(i)[0])));
  return worst;
}
}  // namespace

TEST_SUITE("stochastic-calculus") {
  TEST_CASE("Mehler averages of polynomials") {
    const double t = 0.7, e = std::exp(-t);
    for (double x : {-2.0, 0.0, 0.4, 3.0}) {
      CHECK(ou_apply([](const Vec&) { return 2.5; }, v1(x), t) == doctest::Approx(2.5).epsilon(1e-14));
      CHECK(ou_apply([](const Vec& y) { return y[0]; }, v1(x), t) == doctest::Approx(e * x).epsilon(1e-12));
      CHECK(ou_apply([](const Vec& y) { return y[0] * y[0]; }, v1(x), t) ==
            doctest::Approx(e * e * x * x + 1 - e * e).epsilon(1e-12));
    }
    CHECK(ou_apply([](const Vec& y) { return std::sin(y[0]); }, v1(0.3), 0.0) == doctest::Approx(std::sin(0.3)));
  }

  TEST_CASE("log-space Mehler average of a log-linear density") {
    const double b = 1.3, t = 0.4;
    const double got = ou_apply_log([&](const Vec& y) { return b * y[0] - 0.5 * b * b; }, v1(0.8), t);
    const double bt = std::exp(-t) * b;
    CHECK(got == doctest::Approx(bt * 0.8 - 0.5 * bt * bt).epsilon(1e-12));
  }

  TEST_CASE("semigroup law on the polynomial set") {
    const auto grid = make_grid(GridSpec{GridScheme::GaussHermiteTensor, 2, 6});
    for (auto fn : std::vector<std::function<double(const Vec&)>>{
             [](const Vec& x) { return x[0] * x[1]; },
             [](const Vec& x) { return x[0] * x[0] * x[0] - x[1]; },
             [](const Vec& x) { return x.squaredNorm() * x[0]; }}) {
      const auto rep = semigroup_law_check(fn, 0.3, 0.5, *grid);
      CHECK(rep.pass);
      CHECK(rep.designated_norm() < 1e-8);
    }
  }

  TEST_CASE("generator on a mesh") {
    const auto mesh = make_mesh(1, 401, 5.0);
    const auto c = ou_generator(sample_scalar(mesh, [](const Vec&) { return 3.0; }));
    CHECK(max_interior_error(c, [](double) { return 0.0; }) < 1e-10);
    const auto lin = ou_generator(sample_scalar(mesh, [](const Vec& x) { return x[0]; }));
    CHECK(max_interior_error(lin, [](double x) { return x; }) < 1e-10);
    const auto quad = ou_generator(sample_scalar(mesh, [](const Vec& x) { return 0.5 * x[0] * x[0]; }));
    CHECK(max_interior_error(quad, [](double x) { return x * x - 1; }) < 1e-8);
  }

  TEST_CASE("Hermite eigenrelations") {
    const auto mesh = make_mesh(1, 801, 5.0);
    for (int k = 1; k <= 3; ++k) CHECK(hermite_eigenrelation_check(k, mesh).pass);
    CHECK(hermite(3, 2.0) == doctest::Approx(2.0));  // 8 - 6
  }

  TEST_CASE("fd derivatives are exact on quadratics and need a mesh") {
    const auto mesh = make_mesh(2, 21, 3.0);
    const auto f = sample_scalar(mesh, [](const Vec& x) { return x[0] * x[0] + 3 * x[0] * x[1] - x[1]; });
    const auto g = fd_derivatives(f, 1);
    const auto h = fd_derivatives(f, 2);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const Vec x = mesh->node(i);
      CHECK(g.vector(i)[0] == doctest::Approx(2 * x[0] + 3 * x[1]).epsilon(1e-9));
      CHECK(g.vector(i)[1] == doctest::Approx(3 * x[0] - 1).epsilon(1e-9));
      const Mat H = h.matrix(i);
      CHECK(H(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
      CHECK(H(0, 1) == doctest::Approx(3.0).epsilon(1e-9));
      CHECK(H(1, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    }
    const auto gh = make_grid(GridSpec{GridScheme::GaussHermiteTensor, 1, 10});
    CHECK_THROWS(fd_derivatives(sample_scalar(gh, [](const Vec& x) { return x[0]; }), 1));
  }

  TEST_CASE("Gaussian divergence examples") {
    const auto mesh = make_mesh(1, 401, 5.0);
    Mat e = Mat::Ones(1, static_cast<Eigen::Index>(mesh->size()));
    const auto d1 = divergence(vector_field(mesh, e));
    CHECK(max_interior_error(d1, [](double x) { return x; }) < 1e-12);
    const auto d2 = divergence(vector_field(mesh, mesh->nodes()));
    CHECK(max_interior_error(d2, [](double x) { return x * x - 1; }) < 1e-10);
    const auto ref = PotentialDensity::reference(1);
    const auto d3 = divergence(vector_field(mesh, e), &ref);
    CHECK(max_interior_error(d3, [](double x) { return x; }) < 1e-12);
    const auto shifted = PotentialDensity::mean_shift(v1(2.0));
    const auto d4 = divergence(vector_field(mesh, e), &shifted);
    CHECK(max_interior_error(d4, [](double x) { return x - 2.0; }) < 1e-10);
  }

  TEST_CASE("Carleman-Fredholm determinant") {
    CHECK(carleman_fredholm_det2(Mat::Zero(3, 3)) == doctest::Approx(1.0));
    CHECK(carleman_fredholm_det2(Mat::Constant(1, 1, 1.0)) == doctest::Approx(0.735759).epsilon(1e-6));
    Mat M = Mat::Zero(2, 2);
    M(0, 0) = 1.0;
    M(1, 1) = -0.5;
    CHECK(carleman_fredholm_det2(M) == doctest::Approx(0.606531).epsilon(1e-6));
    CHECK(carleman_fredholm_det2(Mat::Constant(1, 1, -1.0)) == 0.0);
    int sign = 0;
    const double l = log_abs_det2(Mat::Constant(1, 1, -3.0), &sign);
    CHECK(sign == -1);
    CHECK(l == doctest::Approx(std::log(2.0) + 3.0));
    CHECK(det2_factorization_check(7).pass);
  }

  TEST_CASE("det factorization on independent random matrices") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.15, 0.15);
    for (int trial = 0; trial < 50; ++trial) {
      Mat M(3, 3);
      for (int i = 0; i < 9; ++i) M(i / 3, i % 3) = u(rng);
      const double lhs = (Mat::Identity(3, 3) + M).determinant();
      CHECK(std::abs(lhs - carleman_fredholm_det2(M) * std::exp(M.trace())) < 1e-12);
    }
  }

  TEST_CASE("Gaussian Jacobian of a translation") {
    const auto mesh = make_mesh(1, 401, 5.0);
    const auto phi = sample_scalar(mesh, [](const Vec& x) { return x[0]; });
    const auto grad = fd_derivatives(phi, 1);
    const auto hess = fd_derivatives(phi, 2);
    const auto jac = gaussian_jacobian(grad, hess, ou_generator(grad, hess));
    CHECK(jac.non_invertible == 0);
    CHECK(max_interior_error(jac.lambda, [](double x) { return std::exp(-x - 0.5); }) < 1e-8);
  }

  TEST_CASE("Gaussian Jacobian flags a non-invertible Hessian") {
    const auto mesh = make_mesh(1, 101, 3.0);
    const auto phi = sample_scalar(mesh, [](const Vec& x) { return -x[0] * x[0]; });
    const auto grad = fd_derivatives(phi, 1);
    const auto hess = fd_derivatives(phi, 2);
    const auto jac = gaussian_jacobian(grad, hess, ou_generator(grad, hess));
    CHECK(jac.non_invertible == mesh->size());
  }

  TEST_CASE("adjointness examples") {
    const auto grid = make_grid(GridSpec{GridScheme::GaussHermiteTensor, 1, 30});
    const auto ref = PotentialDensity::reference(1);
    const ScalarTestField x{"x", [](const Vec& p) { return p[0]; }, [](const Vec&) { return v1(1.0); }};
    const ScalarTestField x2{"x2", [](const Vec& p) { return p[0] * p[0]; }, [](const Vec& p) { return v1(2 * p[0]); }};
    const VectorTestField e{"e", [](const Vec&) { return v1(1.0); }, [](const Vec&) { return Mat::Zero(1, 1); }};
    const VectorTestField id{"x", [](const Vec& p) { return p; }, [](const Vec&) { return Mat::Identity(1, 1); }};
    CHECK(adjointness_check(x, e, ref, *grid).pass);
    CHECK(adjointness_check(x2, id, ref, *grid).pass);
    CHECK(delta_rho(id, ref, v1(1.5)) == doctest::Approx(1.25));
    // Independent sides of the second example.
    const double lhs = expectation(ref, *grid, [](const Vec& p) { return 2 * p[0] * p[0]; });
    const double rhs = expectation(ref, *grid, [](const Vec& p) { return p[0] * p[0] * (p[0] * p[0] - 1); });
    CHECK(lhs == doctest::Approx(2.0));
    CHECK(rhs == doctest::Approx(2.0));
  }

  TEST_CASE("dictionary identities on log-concave and non-Gaussian densities") {
    const auto grid1 = make_grid(GridSpec{GridScheme::GaussHermiteTensor, 1, 200});
    const auto grid2 = make_grid(GridSpec{GridScheme::GaussHermiteTensor, 2, 120});
    const auto q1 = normalize(PotentialDensity::separable({Polynomial1D{{0, 0.2, 0.3, 0, 0.05}}}), *grid1);
    const auto q2 = normalize(
        PotentialDensity::separable({Polynomial1D{{0, 0, 0.2, 0, 0.05}}, Polynomial1D{{0, 0.1, 0, 0, 0.02}}}), *grid2);
    for (const auto& [rho, grid] : {std::pair{q1, grid1}, std::pair{q2, grid2}}) {
      for (const auto& F : scalar_dictionary(rho.dim()))
        for (const auto& xi : vector_dictionary(rho.dim())) CHECK(adjointness_check(F, xi, rho, *grid).pass);
      for (const auto& xi : vector_dictionary(rho.dim())) CHECK(second_moment_identity_check(xi, rho, *grid).pass);
    }
  }

  TEST_CASE("second moment identity with constant field") {
    const auto grid = make_grid(GridSpec{GridScheme::GaussHermiteTensor, 1, 20});
    const VectorTestField e{"e", [](const Vec&) { return v1(1.0); }, [](const Vec&) { return Mat::Zero(1, 1); }};
    const auto rep = second_moment_identity_check(e, PotentialDensity::reference(1), *grid);
    CHECK(rep.pass);
    CHECK(rep.designated_norm() < 1e-12);
  }
}
