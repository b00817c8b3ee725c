#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "wot/csv.hpp"
#include "wot/density.hpp"
#include "wot/identities.hpp"
#include "wot/quadrature.hpp"

namespace wot {

struct InequalityReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double constant_used = 0.0;
  double tol = 1e-10;
  bool pass = false;
  std::string witness;
  nlohmann::json details = nlohmann::json::object();

  double slack() const { return rhs - lhs; }
  void finalize() { pass = lhs <= rhs + tol; }
};

nlohmann::json to_json(const InequalityReport& report);
CsvTable inequality_table();
void append_row(CsvTable& table, const InequalityReport& report);

enum class W2Method { Auto, Oracle, Entropic };

struct W2Result {
  double value = 0.0;  // d2^2, no 1/2
  std::string method;
};

// Oracle: Gaussian closed form, 1-D quantile or separable product, whichever
// applies. Entropic: Sinkhorn on `mesh` (a truncated-uniform grid).
W2Result wasserstein2(const PotentialDensity& rho, const PotentialDensity& nu, W2Method method = W2Method::Auto,
                      const GridPtr& mesh = nullptr);

// d2^2(rho, beta) <= 2 H(rho | beta).
InequalityReport talagrand_check(const PotentialDensity& rho, const QuadratureGrid& grid,
                                 const GridPtr& mesh = nullptr);

// H(rho | beta) <= I(rho) / 2.
InequalityReport lsi_check(const PotentialDensity& rho, const QuadratureGrid& grid);

struct PoincareEstimate {
  double gap = 0.0;  // min Rayleigh quotient over the dictionary span
  double c_est = 0.0;  // 1 - gap clamped to [0, 1)
  double mesh_gap = -1.0;  // 1-D generalized eigenvalue estimate (-1 when n/a)
  double c_mesh = -1.0;
  std::string witness;
  InequalityReport report;
};

// Rayleigh-Ritz over monomials of total degree 1..max_degree plus `extra`.
PoincareEstimate poincare_constant(const PotentialDensity& rho, const QuadratureGrid& grid,
                                   const std::vector<ScalarTestField>& extra = {}, int max_degree = 4,
                                   int mesh_points = 801);

// d2^2(rho, nu) <= 4 (H(rho|beta) + H(nu|beta)) <= 2 (I_f + I_g).
InequalityReport chain_check(const PotentialDensity& rho, const PotentialDensity& nu, const QuadratureGrid& grid,
                             const GridPtr& mesh = nullptr);

}  // namespace wot
