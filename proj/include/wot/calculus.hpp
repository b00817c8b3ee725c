#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "wot/density.hpp"
#include "wot/quadrature.hpp"
#include "wot/types.hpp"

namespace wot {

enum class FieldKind { Scalar, Vector, Matrix, Tensor3 };

// Values of a scalar/vector/matrix/3-tensor field at every grid node, stored
// as components x nodes. Matrix entry (i, j) is component i*dim + j; tensor
// entry (k, i, j) = d_k M_ij is component (k*dim + i)*dim + j.
class FieldOnGrid {
 public:
  FieldOnGrid(GridPtr grid, FieldKind kind);
  FieldOnGrid(GridPtr grid, FieldKind kind, Mat values);

  const GridPtr& grid() const { return grid_; }
  FieldKind kind() const { return kind_; }
  int dim() const { return grid_->dim(); }
  int components() const { return static_cast<int>(values_.rows()); }
  std::size_t size() const { return static_cast<std::size_t>(values_.cols()); }
  const Mat& values() const { return values_; }
  Mat& values() { return values_; }

  double scalar(std::size_t node) const { return values_(0, static_cast<Eigen::Index>(node)); }
  Vec vector(std::size_t node) const { return values_.col(static_cast<Eigen::Index>(node)); }
  Mat matrix(std::size_t node) const;
  // Contraction sum_k d_k M(node) c_k for a tensor field.
  Mat contract_tensor(std::size_t node, const Vec& c) const;

 private:
  GridPtr grid_;
  FieldKind kind_;
  Mat values_;
};

int component_count(FieldKind kind, int dim);

FieldOnGrid scalar_field(const GridPtr& grid, const std::vector<double>& values);
FieldOnGrid vector_field(const GridPtr& grid, const Mat& values);
// Evaluates fn at every node.
FieldOnGrid sample_scalar(const GridPtr& grid, const std::function<double(const Vec&)>& fn);

// Gradient (order 1), Hessian (2) or third-derivative tensor (3) of a scalar
// field on a truncated-uniform mesh. Throws GridNotUniform otherwise.
FieldOnGrid fd_derivatives(const FieldOnGrid& field, int order);
// Jacobian J(c, d) = d_d xi_c of a vector field (matrix kind).
FieldOnGrid fd_jacobian(const FieldOnGrid& xi);

// Nodes at index distance >= 2 from every face (two boundary shells dropped).
std::vector<std::uint8_t> interior_mask(const QuadratureGrid& grid, int shells = 2);

// Mehler formula: (P_t F)(x) = E[F(e^{-t} x + sqrt(1 - e^{-2t}) Y)], Y ~ N(0, I),
// with a Gauss-Hermite tensor rule of `points` nodes per axis.
double ou_apply(const std::function<double(const Vec&)>& fn, const Vec& x, double t, int points = 40);
// Log-space variant: returns log P_t e^{logfn}; -inf when the average is 0.
double ou_apply_log(const std::function<double(const Vec&)>& logfn, const Vec& x, double t, int points = 40);
FieldOnGrid ou_semigroup(const std::function<double(const Vec&)>& fn, double t, const GridPtr& grid,
                         int points = 40);

// L phi = x . grad phi - lap phi, from FD derivatives.
FieldOnGrid ou_generator(const FieldOnGrid& phi);
// Same operator from supplied gradient and Hessian fields.
FieldOnGrid ou_generator(const FieldOnGrid& grad, const FieldOnGrid& hess);

// delta xi = <x, xi> - div xi; delta_rho xi adds <grad f, xi>. Derivatives by FD.
FieldOnGrid divergence(const FieldOnGrid& xi, const PotentialDensity* rho = nullptr);
// Column-wise: (delta M)_j = delta(M e_j).
FieldOnGrid matrix_divergence(const FieldOnGrid& M, const PotentialDensity* rho = nullptr);

// det_2(I + M) = det(I + M) e^{-tr M}; signed, 0 when I + M is singular.
double carleman_fredholm_det2(const Mat& M);
// log |det_2(I + M)|, with the sign of det(I + M) in *sign.
double log_abs_det2(const Mat& M, int* sign);

struct JacobianField {
  FieldOnGrid lambda;      // det_2(I + H) exp(-L phi - |grad phi|^2 / 2)
  FieldOnGrid log_lambda;  // -inf where I + H is not positive definite
  std::vector<std::uint8_t> invertible;
  std::size_t non_invertible = 0;
};

JacobianField gaussian_jacobian(const FieldOnGrid& grad, const FieldOnGrid& hess, const FieldOnGrid& generator);

}  // namespace wot
