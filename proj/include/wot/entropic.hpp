#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wot/density.hpp"
#include "wot/oracles.hpp"
#include "wot/quadrature.hpp"

namespace wot {

struct DiscreteMeasure {
  Mat points;  // dim x N
  std::vector<double> masses;
  std::optional<MeshSpec> mesh;  // set when points are the nodes of a uniform mesh

  int dim() const { return static_cast<int>(points.rows()); }
  std::size_t size() const { return masses.size(); }
};

// masses proportional to w_i e^{-f(x_i)}, renormalized.
DiscreteMeasure discretize(const PotentialDensity& density, const QuadratureGrid& grid);

enum class SinkhornKernel { Auto, Dense, Mesh };

struct SinkhornOptions {
  SinkhornKernel kernel = SinkhornKernel::Auto;
  bool parallel = true;
  int checkpoint_every = 50;
};

struct SinkhornState {
  Vec u, v;  // log-domain duals: u_i + v_j <= |x_i - y_j|^2 / 2 up to O(eps)
  double epsilon = 0.0;
  int iterations = 0;
  double marginal_err = 0.0;  // L1 row-marginal violation
  bool converged = false;
  std::vector<std::pair<int, double>> checkpoints;
};

SinkhornState sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double epsilon, double tol,
                       int max_iter, const SinkhornOptions& options = {}, const SinkhornState* warm = nullptr);

struct CouplingSummary {
  Mat row_barycenter;  // E[y | x_i]
  Mat col_barycenter;  // E[x | y_j]
  double transport_cost = 0.0;  // <|x-y|^2/2, pi>
};

CouplingSummary summarize_coupling(const SinkhornState& state, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                   const SinkhornOptions& options = {});

// phi = -u, psi = -v recentered so E_mu[phi] = 0; T, S barycentric.
// mu and nu must share their support points (the grid). Throws
// UnusableState when marginal_err exceeds `usable_err`.
TransportSolution extract_potentials(const SinkhornState& state, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     const GridPtr& grid, double usable_err = 1e-3,
                                     const SinkhornOptions& options = {});

struct Extrapolation {
  double intercept = 0.0;
  double slope = 0.0;
  double residual = 0.0;  // RMS of the linear fit
};

// Least-squares line in eps through >= 3 (eps, cost) pairs; intercept at eps = 0.
Extrapolation epsilon_extrapolate(const std::vector<std::pair<double, double>>& costs);

struct EntropicOptions {
  std::vector<double> eps_factors{0.5, 0.25, 0.125};  // multiples of h^2
  double tol = 1e-9;
  int max_iter = 50000;
  SinkhornOptions sinkhorn;
};

struct EntropicStep {
  double epsilon = 0.0;
  double cost = 0.0;  // d2^2 of the entropic coupling
  int iterations = 0;
  double marginal_err = 0.0;
  bool converged = false;
};

struct EntropicResult {
  TransportSolution solution;  // potentials at the smallest eps; cost extrapolated
  std::vector<EntropicStep> steps;
  Extrapolation extrapolation;
};

// Spacing used to scale the eps schedule: mesh spacing, else a
// node-count-based estimate.
double characteristic_spacing(const QuadratureGrid& grid);

EntropicResult solve_entropic(const PotentialDensity& rho, const PotentialDensity& nu, const GridPtr& grid,
                              const EntropicOptions& options = {});

// Rows: epsilon,cost,iterations,marginal_err,converged
std::string entropic_diagnostics_csv(const EntropicResult& result);

}  // namespace wot
