#include "wot/inequalities.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wot/entropic.hpp"
#include "wot/error.hpp"
#include "wot/oracles.hpp"

namespace wot {

nlohmann::json to_json(const InequalityReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["slack"] = r.slack();
  j["constant_used"] = r.constant_used;
  j["tol"] = r.tol;
  j["pass"] = r.pass;
  j["witness"] = r.witness;
  j["details"] = r.details;
  return j;
}

CsvTable inequality_table() { return CsvTable({"name", "lhs", "rhs", "slack", "pass", "witness"}); }

void append_row(CsvTable& table, const InequalityReport& r) {
  table.row({r.name, format_double(r.lhs), format_double(r.rhs), format_double(r.slack()), r.pass ? "true" : "false",
             r.witness});
}

W2Result wasserstein2(const PotentialDensity& rho, const PotentialDensity& nu, W2Method method, const GridPtr& mesh) {
  if (rho.dim() != nu.dim()) throw Error(Errc::DimensionMismatch, "densities live in different dimensions");
  if (method != W2Method::Entropic) {
    if (auto pair = gaussian_pair(rho, nu)) return {gaussian_map(*pair)->cost(), "gaussian"};
    if (rho.dim() == 1) return {quantile_map(rho, nu)->cost(), "quantile-1d"};
    if (rho.factors() && nu.factors()) return {separable_map(rho, nu)->cost(), "separable"};
    if (method == W2Method::Oracle) throw Error(Errc::NoApplicableMethod, "no closed-form oracle for this pair");
  }
  const GridPtr grid = mesh ? mesh : make_mesh(rho.dim(), rho.dim() == 1 ? 161 : 61, 6.0);
  return {solve_entropic(rho, nu, grid).solution.cost, "entropic"};
}

InequalityReport talagrand_check(const PotentialDensity& rho, const QuadratureGrid& grid, const GridPtr& mesh) {
  const auto beta = PotentialDensity::reference(rho.dim());
  const auto w2 = wasserstein2(rho, beta, W2Method::Auto, mesh);
  const auto H = relative_entropy(rho, beta, grid);
  InequalityReport r;
  r.name = "talagrand";
  r.lhs = w2.value;
  r.rhs = H.infinite ? std::numeric_limits<double>::infinity() : 2.0 * H.value;
  r.constant_used = 2.0;
  r.witness = rho.describe();
  r.details["w2_method"] = w2.method;
  r.details["entropy"] = H.value;
  r.details["entropy_infinite"] = H.infinite;
  r.finalize();
  return r;
}

InequalityReport lsi_check(const PotentialDensity& rho, const QuadratureGrid& grid) {
  const auto beta = PotentialDensity::reference(rho.dim());
  const auto H = relative_entropy(rho, beta, grid);
  InequalityReport r;
  r.name = "lsi";
  r.lhs = H.infinite ? std::numeric_limits<double>::infinity() : H.value;
  r.rhs = 0.5 * fisher_information(rho, grid);
  r.constant_used = 0.5;
  r.witness = rho.describe();
  r.finalize();
  return r;
}

namespace {
struct Monomial {
  std::vector<int> powers;
  std::string name;
};

std::vector<Monomial> monomials(int dim, int max_degree) {
  std::vector<Monomial> out;
  std::vector<int> p(dim, 0);
  std::function<void(int, int)> rec = [&](int axis, int remaining) {
    if (axis == dim) {
      int total = 0;
      for (int v : p) total += v;
      if (total == 0) return;
      Monomial m{p, ""};
      for (int d = 0; d < dim; ++d) {
        if (!p[d]) continue;
        if (!m.name.empty()) m.name += "*";
        m.name += "x" + std::to_string(d + 1);
        if (p[d] > 1) m.name += "^" + std::to_string(p[d]);
      }
      out.push_back(m);
      return;
    }
    for (int k = 0; k <= remaining; ++k) {
      p[axis] = k;
      rec(axis + 1, remaining - k);
    }
    p[axis] = 0;
  };
  rec(0, max_degree);
  std::stable_sort(out.begin(), out.end(), [](const Monomial& a, const Monomial& b) {
    int da = 0, db = 0;
    for (int v : a.powers) da += v;
    for (int v : b.powers) db += v;
    return da < db;
  });
  return out;
}

ScalarTestField as_field(const Monomial& m) {
  const auto powers = m.powers;
  return {m.name,
          [powers](const Vec& x) {
            double v = 1.0;
            for (std::size_t d = 0; d < powers.size(); ++d) v *= std::pow(x[d], powers[d]);
            return v;
          },
          [powers](const Vec& x) {
            Vec g = Vec::Zero(static_cast<Eigen::Index>(powers.size()));
            for (std::size_t a = 0; a < powers.size(); ++a) {
              if (!powers[a]) continue;
              double v = powers[a] * std::pow(x[a], powers[a] - 1);
              for (std::size_t d = 0; d < powers.size(); ++d)
                if (d != a) v *= std::pow(x[d], powers[d]);
              g[a] = v;
            }
            return g;
          }};
}

// Smallest nonzero generalized eigenvalue of the weighted Neumann problem
// -(p u')' = lambda p u on a uniform 1-D mesh, P1 elements with lumped mass.
double mesh_spectral_gap(const PotentialDensity& rho, double lo, double hi, int points) {
  auto lp = [&](double x) {
    const double f = rho.value(Vec::Constant(1, x));
    return std::isfinite(f) ? -f - 0.5 * x * x : -std::numeric_limits<double>::infinity();
  };
  double top = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) top = std::max(top, lp(lo + i * (hi - lo) / (points - 1)));
  const double step = (hi - lo) / (points - 1);
  int first = 0, last = points - 1;
  while (first < last && !(lp(lo + first * step) - top > -200.0)) ++first;
  while (last > first && !(lp(lo + last * step) - top > -200.0)) --last;
  hi = lo + last * step;
  lo = lo + first * step;
  const double h = (hi - lo) / (points - 1);
  std::vector<double> edge(points - 1), mass(points, 0.0);
  for (int i = 0; i + 1 < points; ++i) {
    edge[i] = std::exp(lp(lo + (i + 0.5) * h) - top) / h;
    mass[i] += 0.5 * h * edge[i] * h;
    mass[i + 1] += 0.5 * h * edge[i] * h;
  }
  Mat C = Mat::Zero(points, points);
  for (int i = 0; i + 1 < points; ++i) {
    const double s = 1.0 / std::sqrt(mass[i] * mass[i + 1]);
    C(i, i) += edge[i] / mass[i];
    C(i + 1, i + 1) += edge[i] / mass[i + 1];
    C(i, i + 1) -= edge[i] * s;
    C(i + 1, i) -= edge[i] * s;
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(C, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[1];
}
}  // namespace

PoincareEstimate poincare_constant(const PotentialDensity& rho, const QuadratureGrid& grid,
                                   const std::vector<ScalarTestField>& extra, int max_degree, int mesh_points) {
  std::vector<ScalarTestField> dict;
  for (const auto& m : monomials(rho.dim(), max_degree)) dict.push_back(as_field(m));
  for (const auto& f : extra) dict.push_back(f);
  const auto K = static_cast<Eigen::Index>(dict.size());
  if (K == 0) throw Error(Errc::DegenerateVariance, "empty dictionary");

  // Moments under rho, self-normalized on the grid.
  const auto n = grid.size();
  std::vector<double> logw(n);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double f = rho.value(grid.node(i));
    logw[i] = (std::isfinite(f) && grid.weights()[i] > 0) ? std::log(grid.weights()[i]) - f
                                                          : -std::numeric_limits<double>::infinity();
    top = std::max(top, logw[i]);
  }
  Vec mean = Vec::Zero(K);
  Mat second = Mat::Zero(K, K), A = Mat::Zero(K, K);
  double total = 0.0;
  Vec vals(K);
  Mat grads(rho.dim(), K);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::exp(logw[i] - top);
    if (w == 0.0) continue;
    const Vec x = grid.node(i);
    for (Eigen::Index a = 0; a < K; ++a) {
      vals[a] = dict[a].value(x);
      grads.col(a) = dict[a].grad(x);
    }
    total += w;
    mean += w * vals;
    second += w * vals * vals.transpose();
    A += w * grads.transpose() * grads;
  }
  mean /= total;
  second /= total;
  A /= total;
  Mat B = second - mean * mean.transpose();
  B = 0.5 * (B + B.transpose());
  A = 0.5 * (A + A.transpose());

  // Restrict to the numerically nondegenerate part of the covariance.
  Eigen::SelfAdjointEigenSolver<Mat> bez(B);
  const double bmax = bez.eigenvalues().maxCoeff();
  if (!(bmax > 0)) throw Error(Errc::DegenerateVariance, "dictionary has zero variance under rho");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < K; ++k)
    if (bez.eigenvalues()[k] > 1e-12 * bmax) keep.push_back(k);
  Mat W(K, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c)
    W.col(static_cast<Eigen::Index>(c)) = bez.eigenvectors().col(keep[c]) / std::sqrt(bez.eigenvalues()[keep[c]]);
  Eigen::SelfAdjointEigenSolver<Mat> reduced(W.transpose() * A * W);
  PoincareEstimate est;
  est.gap = reduced.eigenvalues()[0];
  est.c_est = std::clamp(1.0 - est.gap, 0.0, std::nextafter(1.0, 0.0));
  const Vec coef = W * reduced.eigenvectors().col(0);
  Eigen::Index lead = 0;
  coef.cwiseAbs().maxCoeff(&lead);
  est.witness = dict[lead].name;

  if (rho.dim() == 1) {
    const double m1 = expectation(rho, grid, [](const Vec& x) { return x[0]; });
    const double var = expectation(rho, grid, [m1](const Vec& x) { return (x[0] - m1) * (x[0] - m1); });
    const double half = 12.0 * std::sqrt(var);
    est.mesh_gap = mesh_spectral_gap(rho, m1 - half, m1 + half, mesh_points);
    est.c_mesh = std::clamp(1.0 - est.mesh_gap, 0.0, std::nextafter(1.0, 0.0));
  }

  auto& r = est.report;
  r.name = "poincare";
  r.constant_used = est.gap;
  r.witness = est.witness;
  // A Poincare inequality holds with constant 1 - c_est iff c_est < 1.
  r.lhs = est.c_est;
  r.rhs = 1.0;
  r.details["gap_dictionary"] = est.gap;
  r.details["c_est"] = est.c_est;
  r.details["gap_mesh"] = est.mesh_gap;
  r.details["c_mesh"] = est.c_mesh;
  r.details["dictionary_size"] = static_cast<int>(K);
  if (rho.max_order() >= 2) r.details["alpha_convexity"] = convexity_modulus(rho).alpha;
  r.tol = 0.0;
  r.pass = est.gap > 0.0;
  return est;
}

InequalityReport chain_check(const PotentialDensity& rho, const PotentialDensity& nu, const QuadratureGrid& grid,
                             const GridPtr& mesh) {
  const auto beta = PotentialDensity::reference(rho.dim());
  const auto w2 = wasserstein2(rho, nu, W2Method::Auto, mesh);
  const auto Hr = relative_entropy(rho, beta, grid);
  const auto Hn = relative_entropy(nu, beta, grid);
  const double If = fisher_information(rho, grid), Ig = fisher_information(nu, grid);
  InequalityReport r;
  r.name = "chain";
  r.lhs = w2.value;
  r.rhs = (Hr.infinite || Hn.infinite) ? std::numeric_limits<double>::infinity() : 4.0 * (Hr.value + Hn.value);
  r.constant_used = 4.0;
  r.witness = rho.describe() + " -> " + nu.describe();
  const double outer = 2.0 * (If + Ig);
  r.details["w2_method"] = w2.method;
  r.details["entropy_bound"] = r.rhs;
  r.details["fisher_bound"] = outer;
  r.finalize();
  r.pass = r.pass && r.rhs <= outer + r.tol;
  return r;
}

}  // namespace wot
