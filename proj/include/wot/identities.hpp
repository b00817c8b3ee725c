#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wot/calculus.hpp"
#include "wot/csv.hpp"
#include "wot/density.hpp"
#include "wot/oracles.hpp"

namespace wot {

struct ResidualReport {
  std::string identity_name;
  std::map<std::string, double> norms;  // L1_nu, L2_rho, sup_grid, plus extras
  std::string designated = "sup_grid";
  double floor = 0.0;  // Richardson FD error floor (0 when not estimated)
  double tolerance_used = 0.0;
  bool pass = false;
  std::size_t excluded_nodes = 0;
  nlohmann::json metadata = nlohmann::json::object();

  double designated_norm() const { return norms.at(designated); }
  // tolerance_used = max(user_tol, 10 * floor); pass <=> designated <= tolerance_used.
  void finalize(double user_tol);
};

nlohmann::json to_json(const ResidualReport& report);
CsvTable residual_table();
void append_row(CsvTable& table, const ResidualReport& report);

struct ResidualOptions {
  double tol = 1e-6;
  bool richardson = true;  // re-tabulate on the h/2 mesh to estimate the FD floor
  int shells = 2;
};

enum class MaDirection { Forward, Backward };

// Log-residual of e^{-f} = e^{-g(T)} det2(I + hess phi) exp(-L phi - |grad phi|^2/2)
// (forward) or of the same relation with (f, phi, T) <-> (g, psi, S)
// (backward). Designated norm: sup over interior nodes.
ResidualReport monge_ampere_residual(MaDirection direction, const TransportSolution& solution,
                                     const PotentialDensity& rho, const PotentialDensity& nu,
                                     const ResidualOptions& options = {});

// grad phi + grad g(T) - grad f = delta_rho[(I + hess phi)^{-1} - I]; designated L2_rho.
ResidualReport dual_identity_residual(const TransportSolution& solution, const PotentialDensity& rho,
                                      const PotentialDensity& nu, const ResidualOptions& options = {});

// (I + hess phi)^{-1} = (I + hess psi)(T), Frobenius per node; designated sup.
ResidualReport inverse_relation_residual(const TransportSolution& solution, const PotentialDensity& rho,
                                         const PotentialDensity& nu, const ResidualOptions& options = {});

// min over nodes and directions of trace(K A K A), A = sum_k d_k hess phi (K h)_k,
// K = (I + hess phi)^{-1}. Passes iff the minimum is >= -tol.
ResidualReport trace_positivity_check(const TransportSolution& solution, const std::vector<Vec>& directions,
                                      double tol = 1e-8);

struct ScalarTestField {
  std::string name;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
};

struct VectorTestField {
  std::string name;
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> jacobian;  // J(c, d) = d_d xi_c
};

// delta_rho xi from closed-form derivatives.
double delta_rho(const VectorTestField& xi, const PotentialDensity& rho, const Vec& x);

// |E_rho <grad F, xi> - E_rho[F delta_rho xi]|.
ResidualReport adjointness_check(const ScalarTestField& F, const VectorTestField& xi, const PotentialDensity& rho,
                                 const QuadratureGrid& grid, double tol = 1e-8);

// |E_rho (delta_rho xi)^2 - E_rho[<(I + hess f) xi, xi> + trace(grad xi grad xi)]|.
ResidualReport second_moment_identity_check(const VectorTestField& xi, const PotentialDensity& rho,
                                            const QuadratureGrid& grid, double tol = 1e-8);

// sup over nodes |P_s P_t F - P_{s+t} F|.
ResidualReport semigroup_law_check(const std::function<double(const Vec&)>& F, double s, double t,
                                   const QuadratureGrid& grid, double tol = 1e-8, int points = 20);

// L He_k = k He_k on a 1-D mesh, L by FD with one Richardson step.
ResidualReport hermite_eigenrelation_check(int k, const GridPtr& mesh, double tol = 1e-8);

// |det(I + M) - det2(M) e^{tr M}| over random 3x3 M with ||M|| < 0.5.
ResidualReport det2_factorization_check(std::uint64_t seed, int trials = 100, double tol = 1e-12);

// Probabilists' Hermite polynomial He_k and its derivative.
double hermite(int k, double x);

// Closed-form dictionaries used by the calculus checks.
std::vector<ScalarTestField> scalar_dictionary(int dim);
std::vector<VectorTestField> vector_dictionary(int dim);

}  // namespace wot
