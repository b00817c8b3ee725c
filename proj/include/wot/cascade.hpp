#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wot/density.hpp"
#include "wot/identities.hpp"
#include "wot/oracles.hpp"
#include "wot/quadrature.hpp"

namespace wot {

// Radial bump theta(r) = q((k - r) / w) with q the quintic smoothstep; equal to
// 1 on r <= k - w and 0 on r >= k. The width w is the smallest one for which
// |theta'|^2 <= theta holds everywhere.
class CutoffBump {
 public:
  explicit CutoffBump(double k);

  double k() const { return k_; }
  double width() const { return width_; }
  double value(double r) const;
  double derivative(double r) const;

  struct Certificate {
    double max_ratio = 0.0;  // sup |theta'|^2 / theta over the shell
    double min_value = 0.0, max_value = 0.0;
    int samples = 0;
    bool pass = false;
  };
  Certificate certify(int samples = 20001) const;

 private:
  double k_;
  double width_;
};

// Marginal on the first n coordinates, re-expressed against the n-dimensional
// reference: f_n(x) = -log int e^{-f(x, y)} d beta(y). Quadratic and separable
// inputs are handled in closed form; others are tabulated on `mesh` (dim n).
PotentialDensity cyl_project(const PotentialDensity& density, int n, const std::optional<MeshSpec>& mesh = {},
                             int gh_points = 24);

// -log P_{1/m} e^{-f}, tabulated on `mesh` and renormalized.
PotentialDensity ou_smooth(const PotentialDensity& density, double m, const MeshSpec& mesh, int gh_points = 64);

struct CutoffResult {
  PotentialDensity density;
  double a_k = 1.0;  // 1 / E_rho[theta_k]
};

// theta_k e^{-f} / E[theta_k e^{-f}], tabulated on `mesh`.
CutoffResult cutoff(const PotentialDensity& density, const CutoffBump& bump, const MeshSpec& mesh);

// -log((e^{-f} + eps) / (1 + eps)), tabulated on `mesh`.
PotentialDensity eps_mix(const PotentialDensity& density, double eps, const MeshSpec& mesh);

enum class CascadeOp { Project, Smooth, Cutoff, Mix };

std::string_view to_string(CascadeOp op);
CascadeOp cascade_op_from_string(std::string_view name);

struct ScheduleEntry {
  CascadeOp op;
  std::vector<double> params;  // refinements, coarse to fine
};

std::vector<ScheduleEntry> default_schedule();

enum class CascadeSolver { Oracle, Entropic };

// A pair of 1-D profiles lifted to R^N along the unit direction u:
// f(x) = h_rho(u . x), g(y) = h_nu(u . y).
struct CylindricalPair {
  std::string name;
  PotentialDensity rho_profile;
  PotentialDensity nu_profile;
  Vec direction;  // normalized internally
};

struct CascadeOptions {
  MeshSpec mesh{1, 2001, 10.0};
  CascadeSolver solver = CascadeSolver::Oracle;
  int smoothing_gh_points = 64;
  int gap_gh_points = 96;
  int quantile_cells = 1024;
  MeshSpec entropic_mesh{1, 241, 6.0};
};

struct CascadeStage {
  int stage = 0;
  int refinement = 0;
  CascadeOp op = CascadeOp::Project;
  double param = 0.0;
  int coordinates = 0;  // n after this stage
  bool failed = false;
  std::string error;
  double phi_gap = 0.0;
  double psi_gap_L1 = 0.0;
  double grad_psi_gap_L2 = 0.0;
  double hess_gap = 0.0;
  double fisher_gap_f = 0.0;
  double fisher_gap_g = 0.0;
  double L_psi_proxy = 0.0;
  double phi_gap_total = 0.0;  // against the original pair; the other gaps are against the stage input
  double grad_psi_sq = 0.0;  // E_nu |grad psi_n|^2
  double hess_psi_sq = 0.0;  // E_nu |hess psi_n|^2
  double a_k = 1.0;
};

struct CascadeResult {
  std::string pair_name;
  std::vector<CascadeStage> stages;
  double fisher_nu = 0.0;
  double M = 0.0;
  double proxy_sup = 0.0;
  bool proxy_bounded = false;
  // Per stage: no gap sequence increases over its refinements.
  std::vector<bool> monotone;
  bool all_monotone() const;
  double final_phi_gap() const;
};

CascadeResult cascade_run(const CylindricalPair& pair, const std::vector<ScheduleEntry>& schedule,
                          const CascadeOptions& options = {});

CsvTable cascade_table();
void append_rows(CsvTable& table, const CascadeResult& result);
nlohmann::json to_json(const CascadeResult& result);

// c E_nu |hess psi|^2 <= 3 (E_rho |grad phi|^2 + E_nu |grad g|^2 + E_rho |grad f|^2),
// refused unless f is certified (1 - c)-convex.
ResidualReport regularity_bound_check(const MapPtr& map, const PotentialDensity& rho, const PotentialDensity& nu,
                                      double c, const QuadratureGrid& grid, double tol = 1e-10);

}  // namespace wot
