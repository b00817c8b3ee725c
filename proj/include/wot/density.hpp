#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wot/quadrature.hpp"
#include "wot/types.hpp"

namespace wot {

enum class Family { Quadratic, Separable, GaussianMixture, GridTabulated };

std::string_view to_string(Family family);

// h(x) = sum_k coeffs[k] x^k
struct Polynomial1D {
  std::vector<double> coeffs;

  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;
  int degree() const;
};

// f(x) = 1/2 x^T Q x + b^T x + c
struct QuadraticParams {
  Mat Q;
  Vec b;
  double c = 0.0;
};

struct SeparableParams {
  std::vector<Polynomial1D> profiles;
};

// Component potential 1/2 x^T B x - m^T x; f = -log sum_j w_j exp(-component_j).
struct MixtureComponent {
  double weight = 1.0;
  Mat B;
  Vec m;
};

struct MixtureParams {
  std::vector<MixtureComponent> components;
};

// Potential values on a truncated-uniform mesh; +inf marks zero density.
struct TabulatedParams {
  MeshSpec mesh;
  std::shared_ptr<const std::vector<double>> values;
  bool has_zeros = false;
  double shift = 0.0;  // min finite value, used when interpolating e^{-(f - shift)}
};

struct Evaluation {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

// A probability density e^{-f} relative to the standard Gaussian on R^dim.
// Potentials are stored (not densities) so tails never underflow.
// Immutable: every transformation returns a new object.
class PotentialDensity {
 public:
  static PotentialDensity reference(int dim);
  static PotentialDensity quadratic(Mat Q, Vec b, double c = 0.0);
  // Density of N(mean, cov) relative to the standard Gaussian (normalized).
  static PotentialDensity gaussian(const Vec& mean, const Mat& cov);
  // Translate of the reference: N(shift, I).
  static PotentialDensity mean_shift(const Vec& shift);
  static PotentialDensity separable(std::vector<Polynomial1D> profiles);
  static PotentialDensity mixture(std::vector<MixtureComponent> components);
  static PotentialDensity tabulated(const MeshSpec& mesh, std::vector<double> values);

  Family family() const;
  int dim() const { return dim_; }
  double log_norm() const { return log_norm_; }
  PotentialDensity with_log_norm(double log_norm) const;

  // f(x) including log_norm; +inf where the density vanishes.
  double value(const Vec& x) const;
  // order 0..2; grid-tabulated densities support order <= 1 only.
  Evaluation evaluate(const Vec& x, int order) const;
  Vec gradient(const Vec& x) const { return evaluate(x, 1).grad; }
  int max_order() const { return family() == Family::GridTabulated ? 1 : 2; }

  const QuadraticParams* as_quadratic() const { return std::get_if<QuadraticParams>(&params_); }
  const SeparableParams* as_separable() const { return std::get_if<SeparableParams>(&params_); }
  const MixtureParams* as_mixture() const { return std::get_if<MixtureParams>(&params_); }
  const TabulatedParams* as_tabulated() const { return std::get_if<TabulatedParams>(&params_); }

  // Per-coordinate 1-D potentials when the density factorizes (separable family,
  // or quadratic with diagonal Q); log_norm is spread onto the first factor.
  std::optional<std::vector<PotentialDensity>> factors() const;
  // (mean, covariance) when the density is a Gaussian measure.
  std::optional<std::pair<Vec, Mat>> gaussian_moments() const;

  std::string describe() const;

 private:
  using Params = std::variant<QuadraticParams, SeparableParams, MixtureParams, TabulatedParams>;
  PotentialDensity(int dim, Params params, double log_norm = 0.0)
      : dim_(dim), params_(std::move(params)), log_norm_(log_norm) {}

  double raw_value(const Vec& x) const;

  int dim_;
  Params params_;
  double log_norm_ = 0.0;
};

// Sum_i w_i e^{-f(x_i)} computed in log space.
double log_mass(const PotentialDensity& density, const QuadratureGrid& grid);

// Adjusts log_norm so the grid integral of e^{-f} against beta is 1.
PotentialDensity normalize(const PotentialDensity& density, const QuadratureGrid& grid);

// E_rho[fn] with rho = e^{-f} d beta, self-normalized on the grid.
double expectation(const PotentialDensity& density, const QuadratureGrid& grid,
                   const std::function<double(const Vec&)>& fn);

struct EntropyValue {
  double value = 0.0;
  bool infinite = false;
};

// H(m1 | m2) = E_{m1}[f2 - f1].
EntropyValue relative_entropy(const PotentialDensity& m1, const PotentialDensity& m2,
                              const QuadratureGrid& grid);

// int |grad f|^2 e^{-f} d beta
double fisher_information(const PotentialDensity& density, const QuadratureGrid& grid);

struct ConvexityCertificate {
  double alpha = 0.0;  // largest alpha with hess f >= -alpha I on the probe set
  int probe_points = 0;
  bool exact = false;  // probe-free (closed form)

  bool is_one_minus_c_convex(double c) const { return alpha <= 1.0 - c + 1e-12; }
};

ConvexityCertificate convexity_modulus(const PotentialDensity& density, const std::vector<Vec>& probes = {});

// Reads a grid-tabulated density from CSV with header x_1,...,x_n,f. Rows
// must cover a full truncated-uniform mesh (any order).
PotentialDensity load_tabulated_csv(const std::string& path);

}  // namespace wot
