#include "wot/identities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "wot/error.hpp"
#include "wot/interpolation.hpp"

namespace wot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

struct NodeResidual {
  Mat r;  // residual components x nodes
  std::vector<std::uint8_t> valid;
  std::size_t non_invertible = 0;
  std::size_t outside = 0;
};

using ResidualFn = std::function<NodeResidual(const TransportSolution&)>;

MeshSpec solution_mesh(const TransportSolution& sol) {
  if (!sol.grid) throw Error(Errc::InvalidArgument, "solution has no grid");
  return sol.grid->mesh();
}

// Normalized weights w_i e^{-f(x_i)} over the masked nodes.
std::vector<double> measure_weights(const PotentialDensity& density, const QuadratureGrid& grid,
                                    const std::vector<std::uint8_t>& mask) {
  std::vector<double> logw(grid.size(), -kInf);
  double top = -kInf;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!mask[i]) continue;
    const double f = density.value(grid.node(i));
    if (!std::isfinite(f) || grid.weights()[i] <= 0) continue;
    logw[i] = std::log(grid.weights()[i]) - f;
    top = std::max(top, logw[i]);
  }
  std::vector<double> w(grid.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (logw[i] > -kInf) total += (w[i] = std::exp(logw[i] - top));
  if (total > 0)
    for (auto& v : w) v /= total;
  return w;
}

std::size_t fine_index(const MeshSpec& coarse, const MeshSpec& fine, std::size_t i) {
  std::vector<int> multi(coarse.dim);
  coarse.multi_index(i, multi);
  for (auto& m : multi) m *= 2;
  return fine.flat_index(multi);
}

ResidualReport assemble(const std::string& name, const std::string& designated, const TransportSolution& sol,
                        const PotentialDensity& rho, const PotentialDensity& nu, const ResidualFn& fn,
                        const ResidualOptions& options) {
  const MeshSpec mesh = solution_mesh(sol);
  const NodeResidual nr = fn(sol);
  auto mask = interior_mask(*sol.grid, options.shells);
  ResidualReport rep;
  rep.identity_name = name;
  rep.designated = designated;
  std::size_t boundary = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) ++boundary;
    mask[i] = mask[i] && nr.valid[i];
  }
  rep.excluded_nodes = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 0));
  const auto wr = measure_weights(rho, *sol.grid, mask);
  const auto wn = measure_weights(nu, *sol.grid, mask);
  double l1_nu = 0, l1_rho = 0, l2_rho = 0, sup = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double a = nr.r.col(static_cast<Eigen::Index>(i)).norm();
    l1_nu += wn[i] * a;
    l1_rho += wr[i] * a;
    l2_rho += wr[i] * a * a;
    sup = std::max(sup, a);
  }
  rep.norms = {{"L1_nu", l1_nu}, {"L1_rho", l1_rho}, {"L2_rho", std::sqrt(l2_rho)}, {"sup_grid", sup}};
  rep.metadata["solver"] = sol.solver_tag;
  rep.metadata["grid"] = sol.grid->describe();
  rep.metadata["boundary_nodes"] = boundary;
  rep.metadata["non_invertible_nodes"] = nr.non_invertible;
  rep.metadata["outside_mesh_nodes"] = nr.outside;
  rep.metadata["cost_convention"] = kCostConvention;

  if (options.richardson && sol.map) {
    const MeshSpec fine = mesh.refined();
    const auto fine_sol = tabulate(sol.map, make_mesh(fine));
    const NodeResidual fr = fn(fine_sol);
    double diff = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const auto j = fine_index(mesh, fine, i);
      if (!fr.valid[j]) continue;
      diff = std::max(diff, (nr.r.col(static_cast<Eigen::Index>(i)) - fr.r.col(static_cast<Eigen::Index>(j))).norm());
    }
    rep.floor = 4.0 / 3.0 * diff;
    rep.metadata["richardson"] = true;
  } else {
    rep.metadata["richardson"] = false;
  }
  rep.finalize(options.tol);
  if (nr.non_invertible > 0) rep.pass = false;
  return rep;
}

bool positive_definite(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() > 0;
}

NodeResidual ma_nodes(MaDirection direction, const TransportSolution& sol, const PotentialDensity& rho,
                      const PotentialDensity& nu) {
  const bool fwd = direction == MaDirection::Forward;
  const auto& pot = fwd ? sol.phi : sol.psi;
  const Mat& map = fwd ? sol.T : sol.S;
  const PotentialDensity& here = fwd ? rho : nu;
  const PotentialDensity& there = fwd ? nu : rho;
  const auto H = fd_derivatives(scalar_field(sol.grid, pot), 2);
  const int d = sol.grid->dim();
  const auto n = static_cast<std::ptrdiff_t>(sol.grid->size());
  NodeResidual out{Mat::Zero(1, n), std::vector<std::uint8_t>(n, 0), 0, 0};
  std::size_t non_inv = 0, outside = 0;
#pragma omp parallel for reduction(+ : non_inv, outside) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Vec x = sol.grid->node(i);
    const Vec grad = map.col(i) - x;
    const Mat h = H.matrix(i);
    if (!positive_definite(Mat::Identity(d, d) + h)) {
      ++non_inv;
      continue;
    }
    const double other = there.value(map.col(i));
    const double self = here.value(x);
    if (!std::isfinite(other) || !std::isfinite(self)) {
      ++outside;
      continue;
    }
    int sign = 0;
    const double ld = log_abs_det2(h, &sign);
    const double L = x.dot(grad) - h.trace();
    out.r(0, i) = -self - (-other + ld - L - 0.5 * grad.squaredNorm());
    out.valid[i] = 1;
  }
  out.non_invertible = non_inv;
  out.outside = outside;
  return out;
}

NodeResidual dual_nodes(const TransportSolution& sol, const PotentialDensity& rho, const PotentialDensity& nu) {
  const auto H = fd_derivatives(scalar_field(sol.grid, sol.phi), 2);
  const int d = sol.grid->dim();
  const auto n = static_cast<std::ptrdiff_t>(sol.grid->size());
  NodeResidual out{Mat::Zero(d, n), std::vector<std::uint8_t>(n, 1), 0, 0};
  FieldOnGrid M(sol.grid, FieldKind::Matrix);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Mat A = Mat::Identity(d, d) + H.matrix(i);
    if (!positive_definite(A)) {
      out.valid[i] = 0;
      ++out.non_invertible;
      continue;
    }
    const Mat K = A.inverse() - Mat::Identity(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) M.values()(r * d + c, i) = K(r, c);
  }
  const auto rhs = matrix_divergence(M, &rho);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (!out.valid[i]) continue;
    const Vec x = sol.grid->node(i);
    const Vec T = sol.T.col(i);
    if (!std::isfinite(nu.value(T)) || !std::isfinite(rho.value(x))) {
      out.valid[i] = 0;
      ++out.outside;
      continue;
    }
    const Vec lhs = (T - x) + nu.gradient(T) - rho.gradient(x);
    out.r.col(i) = lhs - rhs.vector(i);
  }
  return out;
}

NodeResidual inverse_nodes(const TransportSolution& sol) {
  const MeshSpec mesh = sol.grid->mesh();
  const auto Hphi = fd_derivatives(scalar_field(sol.grid, sol.phi), 2);
  const auto Hpsi = fd_derivatives(scalar_field(sol.grid, sol.psi), 2);
  const int d = mesh.dim;
  const auto n = static_cast<std::ptrdiff_t>(sol.grid->size());
  const double inner = mesh.radius - 2.0 * mesh.spacing();
  const MeshInterpolator interp(mesh);
  NodeResidual out{Mat::Zero(d * d, n), std::vector<std::uint8_t>(n, 0), 0, 0};
  std::size_t non_inv = 0, outside = 0;
#pragma omp parallel for reduction(+ : non_inv, outside) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Vec y = sol.T.col(i);
    if (y.cwiseAbs().maxCoeff() > inner) {
      ++outside;
      continue;
    }
    const Mat A = Mat::Identity(d, d) + Hphi.matrix(i);
    if (!positive_definite(A)) {
      ++non_inv;
      continue;
    }
    const Mat K = A.inverse();
    Mat B = Mat::Identity(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        const auto row = r * d + c;
        B(r, c) += interp.interpolate([&](std::size_t j) { return Hpsi.values()(row, static_cast<Eigen::Index>(j)); }, y);
      }
    const Mat diff = K - B;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) out.r(r * d + c, i) = diff(r, c);
    out.valid[i] = 1;
  }
  out.non_invertible = non_inv;
  out.outside = outside;
  return out;
}

ResidualReport scalar_report(const std::string& name, double lhs, double rhs, double tol) {
  ResidualReport rep;
  rep.identity_name = name;
  const double diff = std::abs(lhs - rhs);
  rep.norms = {{"L1_nu", diff}, {"L2_rho", diff}, {"sup_grid", diff}};
  rep.metadata["lhs"] = lhs;
  rep.metadata["rhs"] = rhs;
  rep.finalize(tol);
  return rep;
}
}  // namespace

void ResidualReport::finalize(double user_tol) {
  tolerance_used = std::max(user_tol, 10.0 * floor);
  const double v = designated_norm();
  pass = std::isfinite(v) && v <= tolerance_used;
}

nlohmann::json to_json(const ResidualReport& report) {
  nlohmann::json j;
  j["identity_name"] = report.identity_name;
  j["norms"] = report.norms;
  j["designated_norm"] = report.designated;
  j["floor"] = report.floor;
  j["tolerance_used"] = report.tolerance_used;
  j["pass"] = report.pass;
  j["excluded_nodes"] = report.excluded_nodes;
  j["metadata"] = report.metadata;
  return j;
}

CsvTable residual_table() {
  return CsvTable({"identity", "L1_nu", "L2_rho", "sup", "designated", "value", "tol", "pass", "excluded_nodes"});
}

void append_row(CsvTable& table, const ResidualReport& r) {
  auto norm = [&r](const char* key) {
    const auto it = r.norms.find(key);
    return it == r.norms.end() ? std::string() : format_double(it->second);
  };
  table.row({r.identity_name, norm("L1_nu"), norm("L2_rho"), norm("sup_grid"), r.designated,
             format_double(r.designated_norm()), format_double(r.tolerance_used),
             r.pass ? "true" : "false", std::to_string(r.excluded_nodes)});
}

ResidualReport monge_ampere_residual(MaDirection direction, const TransportSolution& solution,
                                     const PotentialDensity& rho, const PotentialDensity& nu,
                                     const ResidualOptions& options) {
  const std::string name = direction == MaDirection::Forward ? "monge_ampere_forward" : "monge_ampere_backward";
  return assemble(
      name, "sup_grid", solution, rho, nu,
      [&](const TransportSolution& s) { return ma_nodes(direction, s, rho, nu); }, options);
}

ResidualReport dual_identity_residual(const TransportSolution& solution, const PotentialDensity& rho,
                                      const PotentialDensity& nu, const ResidualOptions& options) {
  return assemble(
      "dual_identity", "L2_rho", solution, rho, nu,
      [&](const TransportSolution& s) { return dual_nodes(s, rho, nu); }, options);
}

ResidualReport inverse_relation_residual(const TransportSolution& solution, const PotentialDensity& rho,
                                         const PotentialDensity& nu, const ResidualOptions& options) {
  return assemble("inverse_relation", "sup_grid", solution, rho, nu,
                  [](const TransportSolution& s) { return inverse_nodes(s); }, options);
}

ResidualReport trace_positivity_check(const TransportSolution& solution, const std::vector<Vec>& directions,
                                      double tol) {
  solution_mesh(solution);
  const auto phi = scalar_field(solution.grid, solution.phi);
  const auto H = fd_derivatives(phi, 2);
  const auto D3 = fd_derivatives(phi, 3);
  const auto mask = interior_mask(*solution.grid, 2);
  const int d = solution.grid->dim();
  double qmin = kInf;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < solution.grid->size(); ++i) {
    const Mat A0 = Mat::Identity(d, d) + H.matrix(i);
    if (!mask[i] || !positive_definite(A0)) {
      ++excluded;
      continue;
    }
    const Mat K = A0.inverse();
    for (const auto& h : directions) {
      const Mat A = D3.contract_tensor(i, K * h);
      const Mat KA = K * A;
      qmin = std::min(qmin, (KA * KA).trace());
    }
  }
  ResidualReport rep;
  rep.identity_name = "trace_positivity";
  rep.norms = {{"min_trace", qmin}, {"negative_part", std::max(0.0, -qmin)}};
  rep.designated = "negative_part";
  rep.excluded_nodes = excluded;
  rep.metadata["solver"] = solution.solver_tag;
  rep.metadata["directions"] = directions.size();
  rep.finalize(tol);
  return rep;
}

double delta_rho(const VectorTestField& xi, const PotentialDensity& rho, const Vec& x) {
  const Vec v = xi.value(x);
  return x.dot(v) - xi.jacobian(x).trace() + rho.gradient(x).dot(v);
}

ResidualReport adjointness_check(const ScalarTestField& F, const VectorTestField& xi, const PotentialDensity& rho,
                                 const QuadratureGrid& grid, double tol) {
  const double lhs = expectation(rho, grid, [&](const Vec& x) { return F.grad(x).dot(xi.value(x)); });
  const double rhs = expectation(rho, grid, [&](const Vec& x) { return F.value(x) * delta_rho(xi, rho, x); });
  auto rep = scalar_report("adjointness", lhs, rhs, tol);
  rep.metadata["F"] = F.name;
  rep.metadata["xi"] = xi.name;
  return rep;
}

ResidualReport second_moment_identity_check(const VectorTestField& xi, const PotentialDensity& rho,
                                            const QuadratureGrid& grid, double tol) {
  const double lhs = expectation(rho, grid, [&](const Vec& x) { return std::pow(delta_rho(xi, rho, x), 2); });
  const double rhs = expectation(rho, grid, [&](const Vec& x) {
    const Vec v = xi.value(x);
    const Mat J = xi.jacobian(x);
    const Mat A = Mat::Identity(x.size(), x.size()) + rho.evaluate(x, 2).hess;
    return v.dot(A * v) + (J * J).trace();
  });
  auto rep = scalar_report("second_moment_identity", lhs, rhs, tol);
  rep.metadata["xi"] = xi.name;
  return rep;
}

ResidualReport semigroup_law_check(const std::function<double(const Vec&)>& F, double s, double t,
                                   const QuadratureGrid& grid, double tol, int points) {
  double sup = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.node(i);
    const double lhs = ou_apply([&](const Vec& y) { return ou_apply(F, y, t, points); }, x, s, points);
    const double rhs = ou_apply(F, x, s + t, points);
    sup = std::max(sup, std::abs(lhs - rhs));
  }
  ResidualReport rep;
  rep.identity_name = "ou_semigroup_law";
  rep.norms = {{"sup_grid", sup}};
  rep.metadata["s"] = s;
  rep.metadata["t"] = t;
  rep.finalize(tol);
  return rep;
}

double hermite(int k, double x) {
  double prev = 1.0, cur = x;
  if (k == 0) return prev;
  for (int j = 1; j < k; ++j) {
    const double next = x * cur - j * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

ResidualReport hermite_eigenrelation_check(int k, const GridPtr& mesh_grid, double tol) {
  const MeshSpec mesh = mesh_grid->mesh();
  if (mesh.dim != 1) throw Error(Errc::DimensionMismatch, "eigenrelation check runs on a 1-D mesh");
  auto He = [k](const Vec& x) { return hermite(k, x[0]); };
  const auto coarse = ou_generator(sample_scalar(mesh_grid, He));
  const auto fine_grid = make_mesh(mesh.refined());
  const auto fine = ou_generator(sample_scalar(fine_grid, He));
  const auto mask = interior_mask(*mesh_grid, 2);
  double sup = 0.0;
  for (std::size_t i = 0; i < mesh_grid->size(); ++i) {
    if (!mask[i]) continue;
    const double L = (4.0 * fine.scalar(2 * i) - coarse.scalar(i)) / 3.0;
    sup = std::max(sup, std::abs(L - k * He(mesh_grid->node(i))));
  }
  ResidualReport rep;
  rep.identity_name = "hermite_eigenrelation_k" + std::to_string(k);
  rep.norms = {{"sup_grid", sup}};
  rep.excluded_nodes = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 0));
  rep.finalize(tol);
  return rep;
}

ResidualReport det2_factorization_check(std::uint64_t seed, int trials, double tol) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double sup = 0.0;
  for (int t = 0; t < trials; ++t) {
    Mat M(3, 3);
    for (int i = 0; i < 9; ++i) M(i / 3, i % 3) = unif(rng);
    const double norm = Eigen::JacobiSVD<Mat>(M).singularValues()[0];
    M *= 0.49 * (0.5 + 0.5 * std::abs(unif(rng))) / norm;
    const double direct = (Mat::Identity(3, 3) + M).determinant();
    sup = std::max(sup, std::abs(direct - carleman_fredholm_det2(M) * std::exp(M.trace())));
  }
  ResidualReport rep;
  rep.identity_name = "det2_factorization";
  rep.norms = {{"sup_grid", sup}};
  rep.metadata["seed"] = seed;
  rep.metadata["trials"] = trials;
  rep.finalize(tol);
  return rep;
}

std::vector<ScalarTestField> scalar_dictionary(int dim) {
  std::vector<ScalarTestField> out;
  out.push_back({"1", [](const Vec&) { return 1.0; }, [dim](const Vec&) { return Vec(Vec::Zero(dim)); }});
  for (int k = 0; k < dim; ++k) {
    const std::string xk = "x" + std::to_string(k + 1);
    out.push_back({xk, [k](const Vec& x) { return x[k]; }, [k, dim](const Vec&) { return Vec(Vec::Unit(dim, k)); }});
    out.push_back({xk + "^2", [k](const Vec& x) { return x[k] * x[k]; },
                   [k, dim](const Vec& x) { return Vec(2.0 * x[k] * Vec::Unit(dim, k)); }});
    out.push_back({"sin(" + xk + ")", [k](const Vec& x) { return std::sin(x[k]); },
                   [k, dim](const Vec& x) { return Vec(std::cos(x[k]) * Vec::Unit(dim, k)); }});
  }
  if (dim >= 2) {
    out.push_back({"x1*x2", [](const Vec& x) { return x[0] * x[1]; }, [dim](const Vec& x) {
                     Vec g = Vec::Zero(dim);
                     g[0] = x[1];
                     g[1] = x[0];
                     return g;
                   }});
  }
  return out;
}

std::vector<VectorTestField> vector_dictionary(int dim) {
  std::vector<VectorTestField> out;
  for (int l = 0; l < dim; ++l) {
    const std::string el = "e" + std::to_string(l + 1);
    out.push_back({el, [l, dim](const Vec&) { return Vec(Vec::Unit(dim, l)); },
                   [dim](const Vec&) { return Mat(Mat::Zero(dim, dim)); }});
    for (int k = 0; k < dim; ++k) {
      const std::string xk = "x" + std::to_string(k + 1);
      out.push_back({xk + "*" + el, [k, l, dim](const Vec& x) { return Vec(x[k] * Vec::Unit(dim, l)); },
                     [k, l, dim](const Vec&) {
                       Mat J = Mat::Zero(dim, dim);
                       J(l, k) = 1.0;
                       return J;
                     }});
    }
    const std::string xl = "x" + std::to_string(l + 1);
    out.push_back({xl + "^2*" + el, [l, dim](const Vec& x) { return Vec(x[l] * x[l] * Vec::Unit(dim, l)); },
                   [l, dim](const Vec& x) {
                     Mat J = Mat::Zero(dim, dim);
                     J(l, l) = 2.0 * x[l];
                     return J;
                   }});
    out.push_back({"sin(" + xl + ")*" + el, [l, dim](const Vec& x) { return Vec(std::sin(x[l]) * Vec::Unit(dim, l)); },
                   [l, dim](const Vec& x) {
                     Mat J = Mat::Zero(dim, dim);
                     J(l, l) = std::cos(x[l]);
                     return J;
                   }});
  }
  return out;
}

}  // namespace wot
