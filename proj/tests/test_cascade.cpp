#include <doctest.h>

#include <cmath>

#include "wot/cascade.hpp"
#include "wot/density.hpp"
#include "wot/error.hpp"
#include "wot/oracles.hpp"

using namespace wot;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }
const MeshSpec kMesh{1, 801, 8.0};
GridPtr gh(int dim, int n) { return make_grid(GridSpec{GridScheme::GaussHermiteTensor, dim, n}); }

PotentialDensity quartic(std::vector<double> c) {
  return normalize(PotentialDensity::separable({Polynomial1D{std::move(c)}}), *gh(1, 200));
}

// Integral of e^{-f} against beta by trapezoid on the mesh, independent of the library quadrature.
double mesh_mass(const PotentialDensity& d, const MeshSpec& mesh) {
  double s = 0.0;
  for (int k = 0; k < mesh.points; ++k) {
    const double x = mesh.coordinate(k);
    const double w = (k == 0 || k + 1 == mesh.points) ? 0.5 : 1.0;
    const double f = d.value(v1(x));
    if (std::isfinite(f)) s += w * std::exp(-f - 0.5 * x * x);
  }
  return s * mesh.spacing() / std::sqrt(2 * M_PI);
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::JobFailed;
}
}  // namespace

TEST_SUITE("approximation-cascade") {
  TEST_CASE("cutoff bump certificate on 1e4 radial points") {
    for (double k : {1.0, 4.0, 9.0}) {
      const CutoffBump b(k);
      const auto cert = b.certify(10000);
      CHECK(cert.pass);
      CHECK(cert.max_ratio <= 1 + 1e-9);
      CHECK(cert.min_value >= 0.0);
      CHECK(cert.max_value <= 1.0);
      CHECK(b.value(k) == 0.0);
      CHECK(b.value(k + 1) == 0.0);
      if (k - b.width() > 0.1) CHECK(b.value(k - b.width() - 0.1) == 1.0);
      double worst = 0.0;
      for (int i = 0; i <= 10000; ++i) {
        const double r = k - b.width() + b.width() * i / 10000.0;
        const double t = b.value(r), dt = b.derivative(r);
        if (t > 0) worst = std::max(worst, dt * dt / t);
      }
      CHECK(worst <= 1 + 1e-9);
    }
  }

  TEST_CASE("projection of the 2-D quadratic gives 5/3") {
    Mat Q(2, 2);
    Q << 2.0, 1.0, 1.0, 2.0;
    const auto p = cyl_project(normalize(PotentialDensity::quadratic(Q, Vec::Zero(2)), *gh(2, 40)), 1);
    REQUIRE(p.as_quadratic());
    CHECK(p.as_quadratic()->Q(0, 0) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
    CHECK(log_mass(p, *gh(1, 60)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    const auto z = cyl_project(PotentialDensity::reference(3), 2);
    CHECK(z.dim() == 2);
    CHECK(std::abs(z.value(Vec::Constant(2, 0.7))) < 1e-12);
  }

  TEST_CASE("projection of a separable density keeps the leading profiles") {
    const auto s = PotentialDensity::separable({Polynomial1D{{0, 0.2, 0.3}}, Polynomial1D{{0, 0, 0, 0, 0.1}}});
    const auto p = cyl_project(normalize(s, *gh(2, 200)), 1);
    const auto grid = gh(1, 200);
    CHECK(log_mass(p, *grid) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    const double d = p.value(v1(1.0)) - p.value(v1(-0.5));
    CHECK(d == doctest::Approx((0.2 + 0.3) - (-0.1 + 0.075)).epsilon(1e-12));
  }

  TEST_CASE("projection by tabulation matches the closed form") {
    Mat B = Mat::Identity(2, 2) * 1.5;
    B(0, 1) = B(1, 0) = 0.4;
    const auto mix = PotentialDensity::mixture({MixtureComponent{1.0, B, Vec::Zero(2)}});
    const auto q = normalize(PotentialDensity::quadratic(B, Vec::Zero(2)), *gh(2, 40));
    const auto a = cyl_project(normalize(mix, *gh(2, 40)), 1, MeshSpec{1, 201, 6.0});
    const auto b = cyl_project(q, 1);
    for (double x : {-2.0, -0.3, 0.0, 1.1}) CHECK(a.value(v1(x)) == doctest::Approx(b.value(v1(x))).epsilon(1e-7));
  }

  TEST_CASE("OU smoothing") {
    const auto ref = ou_smooth(PotentialDensity::reference(1), 4.0, kMesh);
    for (double x : {-3.0, 0.0, 2.0}) CHECK(std::abs(ref.value(v1(x))) < 1e-10);
    const double b = 1.5, t = 0.25, bt = std::exp(-t) * b;
    const auto s = ou_smooth(PotentialDensity::mean_shift(v1(b)), 1.0 / t, kMesh);
    for (double x : {-3.0, -1.0, 0.0, 0.5, 2.5}) CHECK(s.value(v1(x)) == doctest::Approx(-bt * x + 0.5 * bt * bt).epsilon(1e-7));
    const auto q = quartic({0, 0.3, 0.2, 0, 0.08});
    double prev = 1e300;
    for (double m : {4.0, 16.0, 64.0, 256.0}) {
      const auto sm = ou_smooth(q, m, kMesh);
      double err = 0.0;
      for (double x = -3; x <= 3; x += 0.25) err = std::max(err, std::abs(sm.value(v1(x)) - q.value(v1(x))));
      CHECK(err < prev);
      prev = err;
    }
    CHECK(mesh_mass(ou_smooth(q, 8.0, kMesh), kMesh) == doctest::Approx(1.0).epsilon(1e-8));
  }

  TEST_CASE("cutoff") {
    const auto q = quartic({0, 0.3, 0, 0, 0.08});
    const auto big = cutoff(q, CutoffBump(40.0), kMesh);
    for (double x : {-5.0, 0.0, 3.0}) CHECK(std::abs(big.density.value(v1(x)) - q.value(v1(x))) < 1e-10);
    CHECK(std::abs(big.a_k - 1.0) < 1e-10);

    const CutoffBump one(1.0);
    const auto c1 = cutoff(PotentialDensity::reference(1), one, kMesh);
    double e_theta = 0.0;  // trapezoid on the support [-1, 1]
    for (int i = 0; i <= 20000; ++i) {
      const double x = -1.0 + i * 1e-4;
      e_theta += (i == 0 || i == 20000 ? 0.5 : 1.0) * one.value(std::abs(x)) * std::exp(-0.5 * x * x);
    }
    e_theta *= 1e-4 / std::sqrt(2 * M_PI);
    CHECK(e_theta < 1.0);
    CHECK(c1.a_k > 1.0);
    CHECK(1.0 / c1.a_k == doctest::Approx(e_theta).epsilon(1e-4));
    CHECK(!std::isfinite(c1.density.value(v1(1.5))));

    double prev = 1e300;
    for (double k = 1; k <= 7; ++k) {
      const auto c = cutoff(q, CutoffBump(k), kMesh);
      CHECK(c.a_k >= 1.0);
      CHECK(c.a_k <= prev);
      prev = c.a_k;
      CHECK(mesh_mass(c.density, kMesh) == doctest::Approx(1.0).epsilon(1e-8));
    }
  }

  TEST_CASE("cutoff with no mass is degenerate") {
    const auto far = PotentialDensity::gaussian(v1(30.0), Mat::Constant(1, 1, 0.01));
    CHECK(code_of([&] { cutoff(far, CutoffBump(1.0), MeshSpec{1, 401, 40.0}); }) == Errc::DegenerateCutoff);
  }

  TEST_CASE("eps mixing") {
    const auto q = quartic({0, 0.3, 0.2, 0, 0.08});
    const auto grid = gh(1, 200);
    const double h0 = relative_entropy(q, PotentialDensity::reference(1), *grid).value;
    double prev_h = h0;
    for (double eps : {0.001, 0.01, 0.1, 1.0}) {
      const auto m = eps_mix(q, eps, kMesh);
      for (int k = 0; k < kMesh.points; k += 7) {
        const double x = kMesh.coordinate(k);
        CHECK(std::exp(-m.value(v1(x))) >= eps / (1 + eps) * (1 - 1e-12));
      }
      CHECK(mesh_mass(m, kMesh) == doctest::Approx(1.0).epsilon(1e-8));
      const double h = relative_entropy(m, PotentialDensity::reference(1), *grid).value;
      CHECK(h <= h0 / (1 + eps) + 1e-8);
      CHECK(h <= prev_h + 1e-12);
      prev_h = h;
    }
    const auto z = eps_mix(PotentialDensity::reference(1), 0.3, kMesh);
    CHECK(std::abs(z.value(v1(1.2))) < 1e-12);
    const auto tiny = eps_mix(q, 1e-12, kMesh);
    CHECK(std::abs(tiny.value(v1(0.4)) - q.value(v1(0.4))) < 1e-9);
  }

  TEST_CASE("schedule names round trip") {
    for (auto op : {CascadeOp::Project, CascadeOp::Smooth, CascadeOp::Cutoff, CascadeOp::Mix})
      CHECK(cascade_op_from_string(to_string(op)) == op);
    CHECK_THROWS_AS(cascade_op_from_string("nope"), Error);
    const auto s = default_schedule();
    REQUIRE(s.size() == 4);
    CHECK(s[0].op == CascadeOp::Project);
    CHECK(s[3].op == CascadeOp::Mix);
  }

  TEST_CASE("identical marginals give zero gaps at every stage") {
    const auto q = quartic({0, 0.3, 0.2, 0, 0.08});
    CascadeOptions o;
    o.mesh = kMesh;
    o.gap_gh_points = 48;
    const auto r = cascade_run(CylindricalPair{"same", q, q, (Vec(3) << 1.0, 0.5, 0.25).finished()}, default_schedule(), o);
    REQUIRE(r.stages.size() == 12);
    for (const auto& st : r.stages) {
      CHECK_FALSE(st.failed);
      CHECK(st.phi_gap < 1e-6);
      CHECK(st.phi_gap_total < 1e-6);
      CHECK(st.grad_psi_gap_L2 < 1e-6);
      CHECK(st.hess_gap < 1e-5);
    }
    auto table = cascade_table();
    append_rows(table, r);
    CHECK(table.size() == 12);
    CHECK(to_json(r).contains("reference"));
  }

  TEST_CASE("quartic pair over the default schedule") {
    CascadeOptions o;
    o.mesh = MeshSpec{1, 1201, 10.0};
    o.gap_gh_points = 64;
    const auto r = cascade_run(CylindricalPair{"q", quartic({0, 0.3, 0, 0, 0.08}),
                                               PotentialDensity::gaussian(v1(0.0), Mat::Constant(1, 1, 0.25)),
                                               (Vec(3) << 1.0, 0.5, 0.25).finished()},
                               default_schedule(), o);
    CHECK(r.all_monotone());
    CHECK(r.final_phi_gap() < 1e-2);
    CHECK(r.proxy_bounded);
    CHECK(r.proxy_sup < r.M);
  }

  TEST_CASE("invalid stage parameters are rejected") {
    const auto q = quartic({0, 0, 0.2, 0, 0.05});
    CascadeOptions o;
    o.mesh = kMesh;
    CHECK_THROWS_AS(cascade_run(CylindricalPair{"bad", q, q, v1(1.0)}, {{CascadeOp::Project, {2.0}}}, o), Error);
  }

  TEST_CASE("regularity bound: Gaussian a = 1, b = 4, c = 0.9") {
    const auto rho = PotentialDensity::reference(1);
    const auto nu = PotentialDensity::gaussian(v1(0.0), Mat::Constant(1, 1, 0.25));
    const auto map = gaussian_map(*gaussian_pair(rho, nu));
    const auto rep = regularity_bound_check(map, rho, nu, 0.9, *gh(1, 100));
    CHECK(std::abs(rep.norms.at("lhs") - 0.9) < 1e-6);
    CHECK(std::abs(rep.norms.at("rhs") - 7.5) < 1e-6);
    CHECK(std::abs(rep.norms.at("slack") - 6.6) < 1e-6);
    CHECK(rep.pass);
  }

  TEST_CASE("regularity bound: identical marginals and anisotropic Gaussian") {
    const auto q = quartic({0, 0, 0.2, 0, 0.05});
    const auto self = regularity_bound_check(quantile_map(q, q), q, q, 0.5, *gh(1, 100));
    CHECK(self.norms.at("lhs") < 1e-10);
    CHECK(self.pass);
    Mat S = Mat::Identity(2, 2);
    S(0, 0) = 3.0;
    S(1, 1) = 0.5;
    const auto rho = PotentialDensity::reference(2);
    const auto nu = PotentialDensity::gaussian(Vec::Zero(2), S);
    const auto rep = regularity_bound_check(gaussian_map(*gaussian_pair(rho, nu)), rho, nu, 0.5, *gh(2, 100));
    // Affine formulas: hess psi = S^{-1/2} - I, grad phi = (S^{1/2} - I) x, grad g = (S^{-1} - I) y.
    double hs = 0, gp = 0, gg = 0;
    for (double s : {3.0, 0.5}) {
      hs += std::pow(1 / std::sqrt(s) - 1, 2);
      gp += std::pow(std::sqrt(s) - 1, 2);
      gg += std::pow(1 / s - 1, 2) * s;
    }
    CHECK(rep.norms.at("lhs") == doctest::Approx(0.5 * hs).epsilon(1e-7));
    CHECK(rep.norms.at("rhs") == doctest::Approx(3 * (gp + gg)).epsilon(1e-7));
    CHECK(rep.pass);
  }

  TEST_CASE("regularity bound refuses a non-log-concave f") {
    const auto dw = quartic({0, 0, -2.0, 0, 1.0});
    const auto nu = PotentialDensity::reference(1);
    CHECK(code_of([&] { regularity_bound_check(quantile_map(dw, nu), dw, nu, 0.5, *gh(1, 100)); }) ==
          Errc::ConvexityNotCertified);
    CHECK(code_of([&] { regularity_bound_check(quantile_map(nu, nu), nu, nu, 1.0, *gh(1, 20)); }) ==
          Errc::InvalidArgument);
  }
}
