#include "wot/calculus.hpp"

#include <cmath>
#include <limits>

#include "wot/error.hpp"
#include "wot/kernels.hpp"

namespace wot {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MeshSpec require_mesh(const QuadratureGrid& grid) {
  const MeshSpec mesh = grid.mesh();
  if (mesh.points < 4) throw Error(Errc::ResolutionTooSmall, "FD stencils need at least 4 points per axis");
  return mesh;
}

// Enumerates the GH tensor rule in `dim` dimensions.
template <class Fn>
void for_each_gh_node(int dim, int points, Fn&& fn) {
  const auto& gh = gauss_hermite(points);
  std::vector<int> idx(dim, 0);
  Vec y(dim);
  while (true) {
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      y[d] = gh.nodes[idx[d]];
      w *= gh.weights[idx[d]];
    }
    fn(y, w);
    int d = dim - 1;
    while (d >= 0 && ++idx[d] == points) idx[d--] = 0;
    if (d < 0) break;
  }
}
}  // namespace

int component_count(FieldKind kind, int dim) {
  switch (kind) {
    case FieldKind::Scalar: return 1;
    case FieldKind::Vector: return dim;
    case FieldKind::Matrix: return dim * dim;
    case FieldKind::Tensor3: return dim * dim * dim;
  }
  return 0;
}

FieldOnGrid::FieldOnGrid(GridPtr grid, FieldKind kind)
    : grid_(std::move(grid)), kind_(kind),
      values_(Mat::Zero(component_count(kind, grid_->dim()), static_cast<Eigen::Index>(grid_->size()))) {}

FieldOnGrid::FieldOnGrid(GridPtr grid, FieldKind kind, Mat values)
    : grid_(std::move(grid)), kind_(kind), values_(std::move(values)) {
  if (values_.rows() != component_count(kind_, grid_->dim()) ||
      values_.cols() != static_cast<Eigen::Index>(grid_->size())) {
    throw Error(Errc::DimensionMismatch, "field shape does not match its kind and grid");
  }
}

Mat FieldOnGrid::matrix(std::size_t node) const {
  const int d = dim();
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = values_(i * d + j, static_cast<Eigen::Index>(node));
  return m;
}

Mat FieldOnGrid::contract_tensor(std::size_t node, const Vec& c) const {
  const int d = dim();
  Mat m = Mat::Zero(d, d);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) += c[k] * values_((k * d + i) * d + j, static_cast<Eigen::Index>(node));
  return m;
}

FieldOnGrid scalar_field(const GridPtr& grid, const std::vector<double>& values) {
  Mat m(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = values[i];
  return FieldOnGrid(grid, FieldKind::Scalar, std::move(m));
}

FieldOnGrid vector_field(const GridPtr& grid, const Mat& values) {
  return FieldOnGrid(grid, FieldKind::Vector, values);
}

FieldOnGrid sample_scalar(const GridPtr& grid, const std::function<double(const Vec&)>& fn) {
  FieldOnGrid out(grid, FieldKind::Scalar);
  const auto n = static_cast<std::ptrdiff_t>(grid->size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out.values()(0, i) = fn(grid->node(i));
  return out;
}

FieldOnGrid fd_derivatives(const FieldOnGrid& field, int order) {
  if (field.kind() != FieldKind::Scalar) throw Error(Errc::InvalidArgument, "fd_derivatives expects a scalar field");
  if (order < 1 || order > 3) throw Error(Errc::UnsupportedOrder, "FD order must be 1, 2 or 3");
  const MeshSpec mesh = require_mesh(*field.grid());
  const int d = mesh.dim;
  const auto n = field.values().cols();
  if (order == 1) {
    Mat out(d, n), tmp;
    for (int a = 0; a < d; ++a) {
      kernels::fd_first(mesh, field.values(), a, tmp);
      out.row(a) = tmp.row(0);
    }
    return FieldOnGrid(field.grid(), FieldKind::Vector, std::move(out));
  }
  Mat first(d, n), tmp;
  for (int a = 0; a < d; ++a) {
    kernels::fd_first(mesh, field.values(), a, tmp);
    first.row(a) = tmp.row(0);
  }
  Mat hess(d * d, n);
  for (int i = 0; i < d; ++i) {
    kernels::fd_second(mesh, field.values(), i, tmp);
    hess.row(i * d + i) = tmp.row(0);
    for (int j = i + 1; j < d; ++j) {
      kernels::fd_first(mesh, first.row(j), i, tmp);
      hess.row(i * d + j) = tmp.row(0);
      hess.row(j * d + i) = tmp.row(0);
    }
  }
  if (order == 2) return FieldOnGrid(field.grid(), FieldKind::Matrix, std::move(hess));
  Mat third(d * d * d, n);
  for (int k = 0; k < d; ++k) {
    kernels::fd_first(mesh, hess, k, tmp);
    third.middleRows(k * d * d, d * d) = tmp;
  }
  return FieldOnGrid(field.grid(), FieldKind::Tensor3, std::move(third));
}

FieldOnGrid fd_jacobian(const FieldOnGrid& xi) {
  if (xi.kind() != FieldKind::Vector) throw Error(Errc::InvalidArgument, "fd_jacobian expects a vector field");
  const MeshSpec mesh = require_mesh(*xi.grid());
  const int d = mesh.dim;
  Mat out(d * d, xi.values().cols()), tmp;
  for (int a = 0; a < d; ++a) {
    kernels::fd_first(mesh, xi.values(), a, tmp);
    for (int c = 0; c < d; ++c) out.row(c * d + a) = tmp.row(c);
  }
  return FieldOnGrid(xi.grid(), FieldKind::Matrix, std::move(out));
}

std::vector<std::uint8_t> interior_mask(const QuadratureGrid& grid, int shells) {
  const MeshSpec mesh = grid.mesh();
  std::vector<std::uint8_t> mask(grid.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mesh.depth(i) >= shells;
  return mask;
}

double ou_apply(const std::function<double(const Vec&)>& fn, const Vec& x, double t, int points) {
  if (t < 0) throw Error(Errc::InvalidArgument, "OU time must be nonnegative");
  if (t == 0) return fn(x);
  const double a = std::exp(-t), b = std::sqrt(-std::expm1(-2.0 * t));
  double s = 0.0;
  for_each_gh_node(static_cast<int>(x.size()), points, [&](const Vec& y, double w) { s += w * fn(a * x + b * y); });
  return s;
}

double ou_apply_log(const std::function<double(const Vec&)>& logfn, const Vec& x, double t, int points) {
  if (t < 0) throw Error(Errc::InvalidArgument, "OU time must be nonnegative");
  if (t == 0) return logfn(x);
  const double a = std::exp(-t), b = std::sqrt(-std::expm1(-2.0 * t));
  std::vector<double> terms;
  double top = kNegInf;
  for_each_gh_node(static_cast<int>(x.size()), points, [&](const Vec& y, double w) {
    const double v = std::log(w) + logfn(a * x + b * y);
    terms.push_back(v);
    if (v > top) top = v;
  });
  if (top == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : terms) s += std::exp(v - top);
  return top + std::log(s);
}

FieldOnGrid ou_semigroup(const std::function<double(const Vec&)>& fn, double t, const GridPtr& grid, int points) {
  return sample_scalar(grid, [&](const Vec& x) { return ou_apply(fn, x, t, points); });
}

FieldOnGrid ou_generator(const FieldOnGrid& grad, const FieldOnGrid& hess) {
  const int d = grad.dim();
  FieldOnGrid out(grad.grid(), FieldKind::Scalar);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    double lap = 0.0;
    for (int a = 0; a < d; ++a) lap += hess.values()(a * d + a, idx);
    out.values()(0, idx) = grad.grid()->node(i).dot(grad.values().col(idx)) - lap;
  }
  return out;
}

FieldOnGrid ou_generator(const FieldOnGrid& phi) {
  return ou_generator(fd_derivatives(phi, 1), fd_derivatives(phi, 2));
}

FieldOnGrid divergence(const FieldOnGrid& xi, const PotentialDensity* rho) {
  const auto J = fd_jacobian(xi);
  const int d = xi.dim();
  FieldOnGrid out(xi.grid(), FieldKind::Scalar);
  const auto n = static_cast<std::ptrdiff_t>(xi.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Vec x = xi.grid()->node(i);
    const auto v = xi.values().col(i);
    double div = 0.0;
    for (int a = 0; a < d; ++a) div += J.values()(a * d + a, i);
    double val = x.dot(v) - div;
    if (rho) val += rho->gradient(x).dot(v);
    out.values()(0, i) = val;
  }
  return out;
}

FieldOnGrid matrix_divergence(const FieldOnGrid& M, const PotentialDensity* rho) {
  if (M.kind() != FieldKind::Matrix) throw Error(Errc::InvalidArgument, "matrix_divergence expects a matrix field");
  const int d = M.dim();
  Mat out(d, M.values().cols());
  for (int j = 0; j < d; ++j) {
    Mat column(d, M.values().cols());
    for (int i = 0; i < d; ++i) column.row(i) = M.values().row(i * d + j);
    out.row(j) = divergence(FieldOnGrid(M.grid(), FieldKind::Vector, std::move(column)), rho).values().row(0);
  }
  return FieldOnGrid(M.grid(), FieldKind::Vector, std::move(out));
}

double carleman_fredholm_det2(const Mat& M) {
  if (M.rows() != M.cols()) throw Error(Errc::DimensionMismatch, "det2 needs a square matrix");
  const Mat A = Mat::Identity(M.rows(), M.cols()) + M;
  return A.partialPivLu().determinant() * std::exp(-M.trace());
}

double log_abs_det2(const Mat& M, int* sign) {
  if (M.rows() != M.cols()) throw Error(Errc::DimensionMismatch, "det2 needs a square matrix");
  const Mat A = Mat::Identity(M.rows(), M.cols()) + M;
  Eigen::PartialPivLU<Mat> lu(A);
  const Mat& LU = lu.matrixLU();
  double log_abs = 0.0;
  int s = static_cast<int>(lu.permutationP().determinant());
  for (Eigen::Index i = 0; i < LU.rows(); ++i) {
    const double v = LU(i, i);
    if (v == 0.0) {
      if (sign) *sign = 0;
      return kNegInf;
    }
    if (v < 0) s = -s;
    log_abs += std::log(std::abs(v));
  }
  if (sign) *sign = s;
  return log_abs - M.trace();
}

JacobianField gaussian_jacobian(const FieldOnGrid& grad, const FieldOnGrid& hess, const FieldOnGrid& generator) {
  JacobianField out{FieldOnGrid(grad.grid(), FieldKind::Scalar), FieldOnGrid(grad.grid(), FieldKind::Scalar), {}, 0};
  out.invertible.assign(grad.size(), 0);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const Mat H = hess.matrix(i);
    Eigen::SelfAdjointEigenSolver<Mat> eig(Mat::Identity(H.rows(), H.cols()) + 0.5 * (H + H.transpose()),
                                           Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0)) {
      out.log_lambda.values()(0, idx) = kNegInf;
      out.lambda.values()(0, idx) = 0.0;
      ++out.non_invertible;
      continue;
    }
    out.invertible[i] = 1;
    int sign = 0;
    const double ld = log_abs_det2(H, &sign);
    const double l = ld - generator.scalar(i) - 0.5 * grad.values().col(idx).squaredNorm();
    out.log_lambda.values()(0, idx) = l;
    out.lambda.values()(0, idx) = std::exp(l);
  }
  return out;
}

}  // namespace wot
