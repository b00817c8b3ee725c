#include <doctest.h>

#include <cmath>

#include "wot/density.hpp"
#include "wot/identities.hpp"
#include "wot/inequalities.hpp"

using namespace wot;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }
GridPtr gh(int dim, int n) { return make_grid(GridSpec{GridScheme::GaussHermiteTensor, dim, n}); }
PotentialDensity gauss1(double var) { return PotentialDensity::gaussian(v1(0.0), Mat::Constant(1, 1, var)); }
PotentialDensity quartic(std::vector<double> c) {
  return normalize(PotentialDensity::separable({Polynomial1D{std::move(c)}}), *gh(1, 200));
}

std::vector<PotentialDensity> catalog() {
  Mat S = Mat::Identity(2, 2);
  S(0, 0) = 2.0;
  S(0, 1) = S(1, 0) = 0.3;
  return {PotentialDensity::reference(1),
          PotentialDensity::mean_shift(v1(0.7)),
          gauss1(0.25),
          gauss1(3.0),
          quartic({0, 0.3, 0, 0, 0.08}),
          quartic({0, 0, -0.3, 0, 0.1}),
          quartic({0, 0, 0, 0.1, 0.1}),
          PotentialDensity::gaussian((Vec(2) << 0.5, -0.2).finished(), S)};
}
}  // namespace

TEST_SUITE("inequalities") {
  TEST_CASE("wasserstein examples") {
    const auto beta = PotentialDensity::reference(1);
    CHECK(wasserstein2(beta, beta).value == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(wasserstein2(beta, PotentialDensity::mean_shift(v1(1.0))).value == doctest::Approx(1.0).epsilon(1e-8));
    Mat S = Mat::Zero(2, 2);
    S(0, 0) = 4.0;
    S(1, 1) = 1.0;
    const auto w = wasserstein2(PotentialDensity::reference(2), PotentialDensity::gaussian(Vec::Zero(2), S));
    CHECK(w.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.method == "gaussian");
    const auto e = wasserstein2(beta, gauss1(0.25), W2Method::Entropic);
    CHECK(e.method == "entropic");
    CHECK(std::abs(e.value - 0.25) / 0.25 < 0.02);
  }

  TEST_CASE("Talagrand closed forms") {
    const auto grid = gh(1, 60);
    const auto zero = talagrand_check(PotentialDensity::reference(1), *grid);
    CHECK(std::abs(zero.lhs) < 1e-12);
    CHECK(std::abs(zero.rhs) < 1e-12);
    CHECK(zero.pass);
    for (double b : {0.5, 1.0, 2.0}) {
      const auto r = talagrand_check(PotentialDensity::mean_shift(v1(b)), *grid);
      CHECK(r.lhs == doctest::Approx(b * b).epsilon(1e-10));
      CHECK(std::abs(r.lhs - r.rhs) < 1e-8);
      CHECK(r.pass);
    }
    const auto q = talagrand_check(gauss1(0.25), *grid);
    CHECK(q.lhs == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(q.rhs == doctest::Approx(0.25 - 1 - std::log(0.25)).epsilon(1e-10));
    CHECK(q.pass);
  }

  TEST_CASE("LSI closed forms") {
    const auto grid = gh(1, 60);
    const auto shift = lsi_check(PotentialDensity::mean_shift(v1(1.0)), *grid);
    CHECK(shift.lhs == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(std::abs(shift.lhs - shift.rhs) < 1e-8);
    const auto q = lsi_check(gauss1(0.25), *grid);
    CHECK(q.lhs == doctest::Approx(0.5 * (0.25 - 1 - std::log(0.25))).epsilon(1e-10));
    CHECK(q.rhs == doctest::Approx(9.0 / 8.0).epsilon(1e-10));
    CHECK(q.pass);
  }

  TEST_CASE("Talagrand, LSI and the chain hold on the catalog") {
    const auto cat = catalog();
    for (const auto& rho : cat) {
      const auto grid = gh(rho.dim(), rho.dim() == 1 ? 120 : 40);
      CHECK(talagrand_check(rho, *grid).pass);
      CHECK(lsi_check(rho, *grid).pass);
    }
    for (std::size_t i = 0; i + 1 < cat.size(); ++i) {
      if (cat[i].dim() != cat[i + 1].dim()) continue;
      const auto r = chain_check(cat[i], cat[i + 1], *gh(1, 120));
      CHECK(r.pass);
      CHECK(r.details.contains("entropy_bound"));
    }
  }

  TEST_CASE("Poincare estimates") {
    const auto grid = gh(1, 80);
    const auto beta = poincare_constant(PotentialDensity::reference(1), *grid);
    CHECK(beta.gap == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(beta.c_est < 1e-8);
    CHECK(beta.witness == "x1");
    const auto half = poincare_constant(gauss1(0.5), *grid);
    CHECK(half.gap == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(half.c_est == 0.0);
    const auto four = poincare_constant(gauss1(4.0), *grid);
    CHECK(four.gap == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(std::abs(four.c_est - 0.75) < 1e-6);
    CHECK(std::abs(four.c_mesh - 0.75) < 1e-2);
  }

  TEST_CASE("Poincare: enlarging the dictionary never raises the estimate") {
    const auto rho = quartic({0, 0, -0.3, 0, 0.1});
    const auto grid = gh(1, 120);
    const auto d2 = poincare_constant(rho, *grid, {}, 2);
    const auto d4 = poincare_constant(rho, *grid, {}, 4);
    const ScalarTestField s{"sin(x)", [](const Vec& x) { return std::sin(x[0]); },
                            [](const Vec& x) { return v1(std::cos(x[0])); }};
    const auto d4s = poincare_constant(rho, *grid, {s}, 4);
    CHECK(d4.gap <= d2.gap + 1e-12);
    CHECK(d4s.gap <= d4.gap + 1e-12);
    // The mesh eigenvalue is the true gap up to discretization, so it bounds the Rayleigh estimate below.
    CHECK(d4s.mesh_gap <= d4s.gap + 1e-6);
  }

  TEST_CASE("Poincare respects the convexity modulus") {
    for (const auto& rho : {quartic({0, 0.3, 0, 0, 0.08}), quartic({0, 0, -0.3, 0, 0.1}), gauss1(1.5)}) {
      const auto cert = convexity_modulus(rho);
      const auto est = poincare_constant(rho, *gh(1, 120));
      if (cert.alpha < 1.0) CHECK(est.c_est <= cert.alpha + 1e-8);
    }
  }

  TEST_CASE("inequality table layout") {
    auto t = inequality_table();
    append_row(t, talagrand_check(PotentialDensity::reference(1), *gh(1, 20)));
    CHECK(t.str().rfind("name,lhs,rhs,slack,pass,witness", 0) == 0);
  }
}
