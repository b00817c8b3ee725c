#include "wot/entropic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wot/csv.hpp"
#include "wot/error.hpp"
#include "wot/kernels.hpp"

namespace wot {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vec log_masses(const DiscreteMeasure& m) {
  Vec out(static_cast<Eigen::Index>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m.masses[i] > 0 ? std::log(m.masses[i]) : kNegInf;
  return out;
}

bool use_mesh(const DiscreteMeasure& mu, const DiscreteMeasure& nu, SinkhornKernel kernel) {
  const bool meshable = mu.mesh && nu.mesh && *mu.mesh == *nu.mesh;
  if (kernel == SinkhornKernel::Mesh && !meshable) {
    throw Error(Errc::GridNotUniform, "mesh kernel needs both measures on the same uniform mesh");
  }
  return kernel == SinkhornKernel::Mesh || (kernel == SinkhornKernel::Auto && meshable);
}

// out_i = -eps LSE_j[(g_j - c(x_i, y_j))/eps + logw_j] with x from `to`, y from `from`.
void softmin(const DiscreteMeasure& to, const DiscreteMeasure& from, const Vec& g, const Vec& logw, double eps,
             bool mesh, bool parallel, Vec& out, const std::vector<std::vector<double>>* axis_logw = nullptr) {
  if (mesh) {
    if (parallel) kernels::softmin_mesh(*to.mesh, g, logw, eps, out, axis_logw);
    else kernels::serial::softmin_mesh(*to.mesh, g, logw, eps, out, axis_logw);
  } else if (parallel) {
    kernels::softmin_dense(to.points, from.points, g, logw, eps, out);
  } else {
    kernels::serial::softmin_dense(to.points, from.points, g, logw, eps, out);
  }
}

// Conditional means E[y | x_i] and E[|y|^2 | x_i] on the mesh via positive
// per-axis weights (y_d + R) and (y_d + R)^2.
void mesh_barycenter(const DiscreteMeasure& to, const DiscreteMeasure& from, const Vec& g, const Vec& logw,
                     double eps, bool parallel, Mat& bary, Vec& second) {
  const MeshSpec& mesh = *to.mesh;
  const int dim = mesh.dim, P = mesh.points;
  const double R = mesh.radius;
  Vec base, shifted, squared;
  softmin(to, from, g, logw, eps, true, parallel, base);
  const auto n = base.size();
  bary.resize(dim, n);
  second = Vec::Zero(n);
  std::vector<std::vector<double>> extra(dim, std::vector<double>(P, 0.0));
  for (int d = 0; d < dim; ++d) {
    for (int j = 0; j < P; ++j) {
      const double c = mesh.coordinate(j) + R;
      extra[d][j] = c > 0 ? std::log(c) : kNegInf;
    }
    softmin(to, from, g, logw, eps, true, parallel, shifted, &extra);
    for (int j = 0; j < P; ++j) extra[d][j] *= 2.0;
    softmin(to, from, g, logw, eps, true, parallel, squared, &extra);
    std::fill(extra[d].begin(), extra[d].end(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m1 = std::exp((base[i] - shifted[i]) / eps);
      const double m2 = std::exp((base[i] - squared[i]) / eps);
      bary(d, i) = m1 - R;
      second[i] += m2 - 2.0 * R * m1 + R * R;
    }
  }
}
}  // namespace

DiscreteMeasure discretize(const PotentialDensity& density, const QuadratureGrid& grid) {
  if (density.dim() != grid.dim()) throw Error(Errc::DimensionMismatch, "density and grid dimensions differ");
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  std::vector<double> logm(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double w = grid.weights()[i];
    const double f = density.value(grid.node(i));
    logm[i] = (w > 0 && std::isfinite(f)) ? std::log(w) - f : kNegInf;
  }
  const double top = *std::max_element(logm.begin(), logm.end());
  if (top == kNegInf) throw Error(Errc::AllZeroMass, "density has no mass on the grid");
  DiscreteMeasure m;
  m.points = grid.nodes();
  m.masses.resize(n);
  double total = 0.0;
  for (std::ptrdiff_t i = 0; i < n; ++i) total += (m.masses[i] = std::exp(logm[i] - top));
  for (auto& v : m.masses) v /= total;
  if (grid.is_uniform_mesh()) m.mesh = grid.mesh();
  return m;
}

SinkhornState sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double epsilon, double tol, int max_iter,
                       const SinkhornOptions& options, const SinkhornState* warm) {
  if (!(epsilon > 0)) throw Error(Errc::InvalidArgument, "epsilon must be positive");
  if (mu.dim() != nu.dim()) throw Error(Errc::DimensionMismatch, "measures live in different dimensions");
  const bool mesh = use_mesh(mu, nu, options.kernel);
  const Vec loga = log_masses(mu), logb = log_masses(nu);

  SinkhornState st;
  st.epsilon = epsilon;
  st.u = (warm && warm->u.size() == loga.size()) ? warm->u : Vec::Zero(loga.size());
  st.v = Vec::Zero(logb.size());
  st.marginal_err = std::numeric_limits<double>::infinity();
  Vec next;
  for (int it = 1; it <= max_iter; ++it) {
    softmin(nu, mu, st.u, loga, epsilon, mesh, options.parallel, st.v);
    softmin(mu, nu, st.v, logb, epsilon, mesh, options.parallel, next);
    double err = 0.0;
    for (Eigen::Index i = 0; i < next.size(); ++i)
      if (mu.masses[i] > 0) err += mu.masses[i] * std::abs(1.0 - std::exp((st.u[i] - next[i]) / epsilon));
    st.u.swap(next);
    st.iterations = it;
    st.marginal_err = err;
    if (options.checkpoint_every > 0 && it % options.checkpoint_every == 0) st.checkpoints.emplace_back(it, err);
    if (err < tol) {
      st.converged = true;
      break;
    }
  }
  return st;
}

CouplingSummary summarize_coupling(const SinkhornState& state, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                   const SinkhornOptions& options) {
  const bool mesh = use_mesh(mu, nu, options.kernel);
  const Vec loga = log_masses(mu), logb = log_masses(nu);
  CouplingSummary out;
  Vec row_second, col_second;
  if (mesh) {
    mesh_barycenter(mu, nu, state.v, logb, state.epsilon, options.parallel, out.row_barycenter, row_second);
    mesh_barycenter(nu, mu, state.u, loga, state.epsilon, options.parallel, out.col_barycenter, col_second);
  } else {
    kernels::barycenter_dense(mu.points, nu.points, state.u, state.v, logb, state.epsilon, out.row_barycenter,
                              row_second);
    kernels::barycenter_dense(nu.points, mu.points, state.v, state.u, loga, state.epsilon, out.col_barycenter,
                              col_second);
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu.masses[i] == 0.0) continue;
    const auto x = mu.points.col(static_cast<Eigen::Index>(i));
    cost += mu.masses[i] * (0.5 * x.squaredNorm() - x.dot(out.row_barycenter.col(i)) + 0.5 * row_second[i]);
  }
  out.transport_cost = cost;
  return out;
}

TransportSolution extract_potentials(const SinkhornState& state, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     const GridPtr& grid, double usable_err, const SinkhornOptions& options) {
  if (!(state.marginal_err <= usable_err)) {
    throw Error(Errc::UnusableState, "marginal error " + format_double(state.marginal_err) + " above " +
                                         format_double(usable_err));
  }
  if (mu.points.cols() != nu.points.cols() || (mu.points - nu.points).cwiseAbs().maxCoeff() != 0.0 ||
      static_cast<std::size_t>(grid->size()) != mu.size()) {
    throw Error(Errc::DimensionMismatch, "potential extraction needs both measures on the solution grid");
  }
  const auto summary = summarize_coupling(state, mu, nu, options);
  TransportSolution sol;
  sol.solver_tag = "entropic";
  sol.grid = grid;
  sol.cost = 2.0 * summary.transport_cost;
  const auto n = mu.size();
  sol.phi.resize(n);
  sol.psi.resize(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += mu.masses[i] * -state.u[i];
  for (std::size_t i = 0; i < n; ++i) {
    sol.phi[i] = -state.u[i] - mean;
    sol.psi[i] = -state.v[i] + mean;
  }
  sol.T = summary.row_barycenter;
  sol.S = summary.col_barycenter;
  if (mu.mesh && mu.dim() == 1) {
    std::vector<double> T(sol.T.data(), sol.T.data() + n), S(sol.S.data(), sol.S.data() + n);
    sol.map = std::make_shared<TabulatedMap1D>(*mu.mesh, sol.phi, sol.psi, std::move(T), std::move(S), sol.cost,
                                               "entropic");
  }
  return sol;
}

Extrapolation epsilon_extrapolate(const std::vector<std::pair<double, double>>& costs) {
  if (costs.size() < 3) throw Error(Errc::InsufficientPoints, "need at least 3 (epsilon, cost) pairs");
  std::vector<double> eps;
  for (const auto& [e, c] : costs) {
    if (!(e > 0) || !std::isfinite(c)) throw Error(Errc::InvalidArgument, "epsilon must be positive, cost finite");
    eps.push_back(e);
  }
  std::sort(eps.begin(), eps.end());
  if (std::adjacent_find(eps.begin(), eps.end()) != eps.end()) {
    throw Error(Errc::InsufficientPoints, "epsilon values must be distinct");
  }
  const double n = static_cast<double>(costs.size());
  double se = 0, sc = 0, see = 0, sec = 0;
  for (const auto& [e, c] : costs) {
    se += e;
    sc += c;
    see += e * e;
    sec += e * c;
  }
  Extrapolation out;
  out.slope = (n * sec - se * sc) / (n * see - se * se);
  out.intercept = (sc - out.slope * se) / n;
  double r2 = 0.0;
  for (const auto& [e, c] : costs) r2 += std::pow(c - out.intercept - out.slope * e, 2);
  out.residual = std::sqrt(r2 / n);
  return out;
}

double characteristic_spacing(const QuadratureGrid& grid) {
  if (grid.is_uniform_mesh()) return grid.mesh().spacing();
  const double per_axis = std::pow(static_cast<double>(grid.size()), 1.0 / grid.dim());
  double extent = 0.0;
  for (int d = 0; d < grid.dim(); ++d) extent += grid.nodes().row(d).maxCoeff() - grid.nodes().row(d).minCoeff();
  extent /= grid.dim();
  return extent / std::max(1.0, per_axis - 1.0);
}

EntropicResult solve_entropic(const PotentialDensity& rho, const PotentialDensity& nu, const GridPtr& grid,
                              const EntropicOptions& options) {
  if (options.eps_factors.empty()) throw Error(Errc::InvalidArgument, "empty epsilon schedule");
  const auto mu_d = discretize(rho, *grid);
  const auto nu_d = discretize(nu, *grid);
  const double h = characteristic_spacing(*grid);
  std::vector<double> factors = options.eps_factors;
  std::sort(factors.rbegin(), factors.rend());

  EntropicResult result;
  SinkhornState state;
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const double eps = factors[k] * h * h;
    state = sinkhorn(mu_d, nu_d, eps, options.tol, options.max_iter, options.sinkhorn, k ? &state : nullptr);
    const auto summary = summarize_coupling(state, mu_d, nu_d, options.sinkhorn);
    result.steps.push_back({eps, 2.0 * summary.transport_cost, state.iterations, state.marginal_err, state.converged});
    pairs.emplace_back(eps, 2.0 * summary.transport_cost);
  }
  result.solution = extract_potentials(state, mu_d, nu_d, grid, 1e-3, options.sinkhorn);
  if (pairs.size() >= 3) {
    result.extrapolation = epsilon_extrapolate(pairs);
    result.solution.cost = result.extrapolation.intercept;
  } else {
    result.extrapolation.intercept = pairs.back().second;
  }
  return result;
}

std::string entropic_diagnostics_csv(const EntropicResult& result) {
  CsvTable table({"epsilon", "cost", "iterations", "marginal_err", "converged"});
  for (const auto& s : result.steps) {
    table.row({format_double(s.epsilon), format_double(s.cost), std::to_string(s.iterations),
               format_double(s.marginal_err), s.converged ? "true" : "false"});
  }
  return table.str();
}

}  // namespace wot
