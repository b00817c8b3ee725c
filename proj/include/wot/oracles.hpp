#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "wot/density.hpp"
#include "wot/quadrature.hpp"
#include "wot/types.hpp"

namespace wot {

// Continuous representation of a pair of Monge potentials.
// T = id + grad phi, S = id + grad psi, phi + psi(T) + |T - id|^2/2 = 0.
class MongeMap {
 public:
  virtual ~MongeMap() = default;

  virtual int dim() const = 0;
  virtual double phi(const Vec& x) const = 0;
  virtual double psi(const Vec& y) const = 0;
  virtual Vec forward(const Vec& x) const = 0;
  virtual Vec backward(const Vec& y) const = 0;
  // I + hess phi at x, I + hess psi at y.
  virtual Mat forward_jacobian(const Vec& x) const = 0;
  virtual Mat backward_jacobian(const Vec& y) const = 0;
  virtual double cost() const = 0;
  virtual std::string tag() const = 0;
};

using MapPtr = std::shared_ptr<const MongeMap>;

class AffineGaussianMap final : public MongeMap {
 public:
  AffineGaussianMap(const Vec& mean1, const Mat& cov1, const Vec& mean2, const Mat& cov2);

  int dim() const override { return static_cast<int>(m1_.size()); }
  double phi(const Vec& x) const override;
  double psi(const Vec& y) const override;
  Vec forward(const Vec& x) const override { return m2_ + A_ * (x - m1_); }
  Vec backward(const Vec& y) const override { return m1_ + Ainv_ * (y - m2_); }
  Mat forward_jacobian(const Vec&) const override { return A_; }
  Mat backward_jacobian(const Vec&) const override { return Ainv_; }
  double cost() const override { return cost_; }
  std::string tag() const override { return "gaussian"; }

  const Mat& A() const { return A_; }

 private:
  Vec m1_, m2_;
  Mat A_, Ainv_;
  double phi_shift_ = 0.0;
  double cost_ = 0.0;
};

struct QuantileOptions {
  int cells = 2048;
  bool require_normalized = true;
  double normalization_tol = 1e-6;
};

// Monotone rearrangement between two 1-D densities. CDFs are integrated
// cell-wise with Gauss-Legendre; the quantile inversion is Newton with a
// bisection fallback, using the survival function in the upper half so both
// tails keep full relative precision.
class QuantileMap1D final : public MongeMap {
 public:
  QuantileMap1D(const PotentialDensity& rho, const PotentialDensity& nu, QuantileOptions options = {});
  ~QuantileMap1D() override;

  int dim() const override { return 1; }
  double phi(const Vec& x) const override { return phi(x[0]); }
  double psi(const Vec& y) const override { return psi(y[0]); }
  Vec forward(const Vec& x) const override { return Vec::Constant(1, T(x[0])); }
  Vec backward(const Vec& y) const override { return Vec::Constant(1, S(y[0])); }
  Mat forward_jacobian(const Vec& x) const override { return Mat::Constant(1, 1, dT(x[0])); }
  Mat backward_jacobian(const Vec& y) const override { return Mat::Constant(1, 1, dS(y[0])); }
  double cost() const override { return cost_; }
  std::string tag() const override { return "quantile-1d"; }

  double phi(double x) const;
  double psi(double y) const;
  double T(double x) const;
  double S(double y) const;
  double dT(double x) const;
  double dS(double y) const;

 private:
  class Cdf;
  std::unique_ptr<Cdf> rho_, nu_;
  std::vector<double> edges_;      // cells for the phi primitive (rho support)
  std::vector<double> D_;          // T - id at Gauss-Legendre nodes, cell-major
  std::vector<double> primitive_;  // integral of T - id from the left support end
  double phi_shift_ = 0.0;
  double cost_ = 0.0;

  double primitive(double x) const;
};

// Coordinatewise product of 1-D maps.
class SeparableMap final : public MongeMap {
 public:
  explicit SeparableMap(std::vector<MapPtr> factors);

  int dim() const override { return static_cast<int>(factors_.size()); }
  double phi(const Vec& x) const override;
  double psi(const Vec& y) const override;
  Vec forward(const Vec& x) const override;
  Vec backward(const Vec& y) const override;
  Mat forward_jacobian(const Vec& x) const override;
  Mat backward_jacobian(const Vec& y) const override;
  double cost() const override;
  std::string tag() const override { return "separable"; }

 private:
  std::vector<MapPtr> factors_;
};

// 1-D map given by nodal tables on a uniform mesh (e.g. from Sinkhorn).
class TabulatedMap1D final : public MongeMap {
 public:
  TabulatedMap1D(MeshSpec mesh, std::vector<double> phi, std::vector<double> psi, std::vector<double> T,
                 std::vector<double> S, double cost, std::string tag);

  int dim() const override { return 1; }
  double phi(const Vec& x) const override;
  double psi(const Vec& y) const override;
  Vec forward(const Vec& x) const override;
  Vec backward(const Vec& y) const override;
  Mat forward_jacobian(const Vec& x) const override;
  Mat backward_jacobian(const Vec& y) const override;
  double cost() const override { return cost_; }
  std::string tag() const override { return tag_; }

 private:
  MeshSpec mesh_;
  std::vector<double> phi_, psi_, T_, S_;
  double cost_;
  std::string tag_;
};

// Potentials and maps tabulated on a grid; the same nodes serve as x (for
// phi, T) and y (for psi, S).
struct TransportSolution {
  std::string solver_tag;
  double cost = 0.0;
  GridPtr grid;
  std::vector<double> phi, psi;
  Mat T, S;  // dim x nodes
  MapPtr map;  // may be null for purely discrete solutions
};

TransportSolution tabulate(const MapPtr& map, const GridPtr& grid);
nlohmann::json to_json(const TransportSolution& solution);

struct GaussianPair {
  Vec mean1, mean2;
  Mat cov1, cov2;
};

// Moments of two Gaussian-family densities, or nullopt.
std::optional<GaussianPair> gaussian_pair(const PotentialDensity& rho, const PotentialDensity& nu);

MapPtr gaussian_map(const GaussianPair& pair);
MapPtr quantile_map(const PotentialDensity& rho, const PotentialDensity& nu, QuantileOptions options = {});
MapPtr separable_map(const PotentialDensity& rho, const PotentialDensity& nu, QuantileOptions options = {});

TransportSolution solve_gaussian(const GaussianPair& pair, const GridPtr& grid);
TransportSolution solve_1d(const PotentialDensity& rho, const PotentialDensity& nu, const GridPtr& grid);
TransportSolution solve_separable(const PotentialDensity& rho, const PotentialDensity& nu, const GridPtr& grid);

}  // namespace wot
