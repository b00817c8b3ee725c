#include "wot/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "wot/error.hpp"
#include "wot/interpolation.hpp"

namespace wot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Evaluates f at every grid node (parallel, deterministic order of storage).
std::vector<double> tabulate_values(const PotentialDensity& density, const QuadratureGrid& grid) {
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  std::vector<double> f(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) f[i] = density.value(grid.node(i));
  return f;
}

void check_dim(const PotentialDensity& density, const QuadratureGrid& grid) {
  if (density.dim() != grid.dim()) {
    throw Error(Errc::DimensionMismatch, "density dim " + std::to_string(density.dim()) + " vs grid dim " +
                                             std::to_string(grid.dim()));
  }
}
}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Quadratic: return "quadratic";
    case Family::Separable: return "separable-1d-list";
    case Family::GaussianMixture: return "gaussian-mixture-log";
    case Family::GridTabulated: return "grid-tabulated";
  }
  return "unknown";
}

double Polynomial1D::value(double x) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double Polynomial1D::d1(double x) const {
  double acc = 0.0;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k) acc = acc * x + k * coeffs[k];
  return acc;
}

double Polynomial1D::d2(double x) const {
  double acc = 0.0;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 2; --k) acc = acc * x + k * (k - 1) * coeffs[k];
  return acc;
}

int Polynomial1D::degree() const {
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k)
    if (coeffs[k] != 0.0) return k;
  return 0;
}

PotentialDensity PotentialDensity::reference(int dim) {
  if (dim < 1) throw Error(Errc::InvalidArgument, "dimension must be positive");
  return quadratic(Mat::Zero(dim, dim), Vec::Zero(dim), 0.0);
}

PotentialDensity PotentialDensity::quadratic(Mat Q, Vec b, double c) {
  if (Q.rows() != Q.cols() || Q.rows() != b.size() || Q.rows() < 1) {
    throw Error(Errc::DimensionMismatch, "quadratic parameters have inconsistent shapes");
  }
  if (!Q.isApprox(Q.transpose(), 1e-14) && (Q - Q.transpose()).norm() > 1e-14) {
    throw Error(Errc::InvalidArgument, "quadratic Q must be symmetric");
  }
  const int dim = static_cast<int>(Q.rows());
  return PotentialDensity(dim, QuadraticParams{std::move(Q), std::move(b), c});
}

PotentialDensity PotentialDensity::gaussian(const Vec& mean, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success || cov.rows() != mean.size()) {
    throw Error(Errc::NotSPD, "covariance must be symmetric positive definite");
  }
  const int n = static_cast<int>(mean.size());
  const Mat precision = llt.solve(Mat::Identity(n, n));
  const Mat P = 0.5 * (precision + precision.transpose());
  double log_det = 0.0;
  for (int i = 0; i < n; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  const Mat Q = P - Mat::Identity(n, n);
  const Vec b = -P * mean;
  const double c = 0.5 * mean.dot(P * mean) + 0.5 * log_det;
  return quadratic(Q, b, c);
}

PotentialDensity PotentialDensity::mean_shift(const Vec& shift) {
  const int n = static_cast<int>(shift.size());
  return quadratic(Mat::Zero(n, n), -shift, 0.5 * shift.squaredNorm());
}

PotentialDensity PotentialDensity::separable(std::vector<Polynomial1D> profiles) {
  if (profiles.empty()) throw Error(Errc::InvalidArgument, "separable density needs at least one profile");
  const int dim = static_cast<int>(profiles.size());
  return PotentialDensity(dim, SeparableParams{std::move(profiles)});
}

PotentialDensity PotentialDensity::mixture(std::vector<MixtureComponent> components) {
  if (components.empty()) throw Error(Errc::InvalidArgument, "mixture needs at least one component");
  const auto dim = components.front().m.size();
  for (const auto& c : components) {
    if (c.m.size() != dim || c.B.rows() != dim || c.B.cols() != dim) {
      throw Error(Errc::DimensionMismatch, "mixture components have inconsistent shapes");
    }
    if (!(c.weight > 0)) throw Error(Errc::InvalidArgument, "mixture weights must be positive");
  }
  return PotentialDensity(static_cast<int>(dim), MixtureParams{std::move(components)});
}

PotentialDensity PotentialDensity::tabulated(const MeshSpec& mesh, std::vector<double> values) {
  if (values.size() != mesh.size()) throw Error(Errc::DimensionMismatch, "tabulated values do not fill the mesh");
  if (mesh.points < 2) throw Error(Errc::ResolutionTooSmall, "tabulated mesh needs two points per axis");
  TabulatedParams p;
  p.mesh = mesh;
  p.shift = kInf;
  for (double v : values) {
    if (std::isnan(v) || v == -kInf) throw Error(Errc::InvalidArgument, "tabulated potential must be finite or +inf");
    if (v == kInf) p.has_zeros = true;
    else p.shift = std::min(p.shift, v);
  }
  if (p.shift == kInf) throw Error(Errc::AllZeroMass, "tabulated density vanishes everywhere");
  p.values = std::make_shared<const std::vector<double>>(std::move(values));
  return PotentialDensity(mesh.dim, std::move(p));
}

Family PotentialDensity::family() const {
  return std::visit(
      [](const auto& p) -> Family {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, QuadraticParams>) return Family::Quadratic;
        else if constexpr (std::is_same_v<T, SeparableParams>) return Family::Separable;
        else if constexpr (std::is_same_v<T, MixtureParams>) return Family::GaussianMixture;
        else return Family::GridTabulated;
      },
      params_);
}

PotentialDensity PotentialDensity::with_log_norm(double log_norm) const {
  PotentialDensity copy = *this;
  copy.log_norm_ = log_norm;
  return copy;
}

double PotentialDensity::value(const Vec& x) const { return evaluate(x, 0).value; }

double PotentialDensity::raw_value(const Vec& x) const { return evaluate(x, 0).value - log_norm_; }

Evaluation PotentialDensity::evaluate(const Vec& x, int order) const {
  if (x.size() != dim_) throw Error(Errc::DimensionMismatch, "point has wrong dimension");
  if (order < 0 || order > 2) throw Error(Errc::UnsupportedOrder, "order must be 0, 1 or 2");
  Evaluation out;
  if (order >= 1) out.grad = Vec::Zero(dim_);
  if (order >= 2) out.hess = Mat::Zero(dim_, dim_);

  if (const auto* q = as_quadratic()) {
    const Vec qx = q->Q * x;
    out.value = 0.5 * x.dot(qx) + q->b.dot(x) + q->c;
    if (order >= 1) out.grad = qx + q->b;
    if (order >= 2) out.hess = q->Q;
  } else if (const auto* s = as_separable()) {
    out.value = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const auto& h = s->profiles[i];
      out.value += h.value(x[i]);
      if (order >= 1) out.grad[i] = h.d1(x[i]);
      if (order >= 2) out.hess(i, i) = h.d2(x[i]);
    }
  } else if (const auto* m = as_mixture()) {
    const auto k = m->components.size();
    std::vector<double> logits(k);
    std::vector<Vec> grads(order >= 1 ? k : 0);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& c = m->components[j];
      const Vec bx = c.B * x;
      logits[j] = std::log(c.weight) - (0.5 * x.dot(bx) - c.m.dot(x));
      if (order >= 1) grads[j] = bx - c.m;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double l : logits) total += std::exp(l - top);
    out.value = -(top + std::log(total));
    if (order >= 1) {
      std::vector<double> pi(k);
      for (std::size_t j = 0; j < k; ++j) pi[j] = std::exp(logits[j] - top) / total;
      for (std::size_t j = 0; j < k; ++j) out.grad += pi[j] * grads[j];
      if (order >= 2) {
        for (std::size_t j = 0; j < k; ++j) {
          out.hess += pi[j] * (m->components[j].B - grads[j] * grads[j].transpose());
        }
        out.hess += out.grad * out.grad.transpose();
      }
    }
  } else {
    const auto& t = *as_tabulated();
    if (order >= 2) {
      throw Error(Errc::UnsupportedOrder, "grid-tabulated densities have no second derivatives; use fd_derivatives");
    }
    const MeshInterpolator interp(t.mesh);
    if (!interp.contains(x)) {
      out.value = kInf;
      return out;
    }
    const auto& v = *t.values;
    if (!t.has_zeros) {
      out.value = interp.interpolate(v, x);
      if (order >= 1)
        for (int d = 0; d < dim_; ++d) out.grad[d] = interp.interpolate(v, x, d);
    } else {
      // Potential interpolation away from zeros; near them, multilinear density
      // interpolation, which cannot overshoot below zero.
      auto potential = [&v](std::size_t i) { return v[i] == kInf ? std::nan("") : v[i]; };
      out.value = interp.interpolate(potential, x);
      if (std::isfinite(out.value)) {
        if (order >= 1)
          for (int d = 0; d < dim_; ++d) out.grad[d] = interp.interpolate(potential, x, d);
      } else {
        auto density = [&v, shift = t.shift](std::size_t i) { return v[i] == kInf ? 0.0 : std::exp(-(v[i] - shift)); };
        const double F = interp.interpolate_linear(density, x);
        if (!(F > 1e-300)) {
          out.value = kInf;
          return out;
        }
        out.value = -std::log(F) + t.shift;
        if (order >= 1)
          for (int d = 0; d < dim_; ++d) out.grad[d] = -interp.interpolate_linear(density, x, d) / F;
      }
    }
  }
  out.value += log_norm_;
  return out;
}

std::optional<std::vector<PotentialDensity>> PotentialDensity::factors() const {
  if (dim_ == 1) return std::vector<PotentialDensity>{*this};
  std::vector<Polynomial1D> profiles;
  if (const auto* s = as_separable()) {
    profiles = s->profiles;
  } else if (const auto* q = as_quadratic()) {
    Mat off = q->Q;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() != 0.0) return std::nullopt;
    for (int i = 0; i < dim_; ++i) profiles.push_back(Polynomial1D{{i == 0 ? q->c : 0.0, q->b[i], 0.5 * q->Q(i, i)}});
  } else {
    return std::nullopt;
  }
  std::vector<PotentialDensity> out;
  for (int i = 0; i < dim_; ++i) {
    out.push_back(separable({profiles[i]}).with_log_norm(i == 0 ? log_norm_ : 0.0));
  }
  return out;
}

std::optional<std::pair<Vec, Mat>> PotentialDensity::gaussian_moments() const {
  const auto* q = as_quadratic();
  if (!q) return std::nullopt;
  const Mat precision = q->Q + Mat::Identity(dim_, dim_);
  Eigen::LLT<Mat> llt(precision);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Mat cov = llt.solve(Mat::Identity(dim_, dim_));
  return std::make_pair(Vec(-cov * q->b), Mat(0.5 * (cov + cov.transpose())));
}

std::string PotentialDensity::describe() const {
  std::ostringstream os;
  os << to_string(family()) << "(dim=" << dim_ << ", log_norm=" << log_norm_ << ")";
  return os.str();
}

double log_mass(const PotentialDensity& density, const QuadratureGrid& grid) {
  check_dim(density, grid);
  const auto f = tabulate_values(density, grid);
  const auto& w = grid.weights();
  double top = -kInf;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (w[i] > 0 && f[i] < kInf) top = std::max(top, std::log(w[i]) - f[i]);
  if (top == -kInf) return -kInf;
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (w[i] > 0 && f[i] < kInf) total += std::exp(std::log(w[i]) - f[i] - top);
  return top + std::log(total);
}

PotentialDensity normalize(const PotentialDensity& density, const QuadratureGrid& grid) {
  const double lm = log_mass(density, grid);
  if (!std::isfinite(lm)) throw Error(Errc::NonIntegrable, "grid integral of e^{-f} is zero or not finite");
  return density.with_log_norm(density.log_norm() + lm);
}

double expectation(const PotentialDensity& density, const QuadratureGrid& grid,
                   const std::function<double(const Vec&)>& fn) {
  check_dim(density, grid);
  const auto f = tabulate_values(density, grid);
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  double top = kInf;
  for (double v : f) top = std::min(top, v);
  if (top == kInf) throw Error(Errc::NonIntegrable, "density vanishes on the grid");
  std::vector<double> terms(grid.size(), 0.0), mass(grid.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (f[i] == kInf) continue;
    mass[i] = grid.weights()[i] * std::exp(-(f[i] - top));
    if (mass[i] > 0) terms[i] = mass[i] * fn(grid.node(i));
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    num += terms[i];
    den += mass[i];
  }
  return num / den;
}

EntropyValue relative_entropy(const PotentialDensity& m1, const PotentialDensity& m2, const QuadratureGrid& grid) {
  if (m1.dim() != m2.dim()) throw Error(Errc::DimensionMismatch, "relative entropy of densities with different dims");
  check_dim(m1, grid);
  const auto f1 = tabulate_values(m1, grid);
  const auto f2 = tabulate_values(m2, grid);
  double top = kInf;
  for (double v : f1) top = std::min(top, v);
  if (top == kInf) throw Error(Errc::NonIntegrable, "first measure vanishes on the grid");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (f1[i] == kInf) continue;
    const double mass = grid.weights()[i] * std::exp(-(f1[i] - top));
    if (mass == 0.0) continue;
    if (f2[i] == kInf) return EntropyValue{0.0, true};
    num += mass * (f2[i] - f1[i]);
    den += mass;
  }
  return EntropyValue{num / den, false};
}

double fisher_information(const PotentialDensity& density, const QuadratureGrid& grid) {
  return expectation(density, grid, [&density](const Vec& x) { return density.evaluate(x, 1).grad.squaredNorm(); });
}

namespace {
// Minimum over R of h'' for polynomials up to degree 4; -inf when unbounded.
double polynomial_min_curvature(const Polynomial1D& h) {
  const int deg = h.degree();
  auto c = [&h](int k) { return k < static_cast<int>(h.coeffs.size()) ? h.coeffs[k] : 0.0; };
  if (deg <= 2) return 2.0 * c(2);
  if (deg == 3) return -kInf;
  if (c(4) < 0) return -kInf;
  const double xs = -c(3) / (4.0 * c(4));
  return h.d2(xs);
}
}  // namespace

ConvexityCertificate convexity_modulus(const PotentialDensity& density, const std::vector<Vec>& probes) {
  ConvexityCertificate cert;
  if (const auto* q = density.as_quadratic()) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(q->Q, Eigen::EigenvaluesOnly);
    cert.alpha = -eig.eigenvalues().minCoeff();
    cert.exact = true;
    return cert;
  }
  if (const auto* s = density.as_separable()) {
    bool closed_form = true;
    for (const auto& h : s->profiles) closed_form = closed_form && h.degree() <= 4;
    if (closed_form) {
      double worst = kInf;
      for (const auto& h : s->profiles) worst = std::min(worst, polynomial_min_curvature(h));
      cert.alpha = -worst;
      cert.exact = true;
      return cert;
    }
  }
  if (density.max_order() < 2) {
    throw Error(Errc::UnsupportedOrder, "convexity modulus needs second derivatives");
  }
  if (probes.empty()) throw Error(Errc::InvalidArgument, "probe points required for this family");
  cert.alpha = -kInf;
  for (const auto& x : probes) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(density.evaluate(x, 2).hess, Eigen::EigenvaluesOnly);
    cert.alpha = std::max(cert.alpha, -eig.eigenvalues().minCoeff());
  }
  cert.probe_points = static_cast<int>(probes.size());
  return cert;
}

PotentialDensity load_tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidArgument, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::InvalidArgument, "empty CSV " + path);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      header.push_back(cell);
    }
  }
  const int dim = static_cast<int>(header.size()) - 1;
  if (dim < 1 || header.back() != "f") throw Error(Errc::InvalidArgument, "CSV header must be x_1,...,x_n,f");
  for (int d = 0; d < dim; ++d) {
    if (header[d] != "x_" + std::to_string(d + 1)) throw Error(Errc::InvalidArgument, "CSV header must be x_1,...,x_n,f");
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      if (cell.find("inf") != std::string::npos) row.push_back(kInf);
      else row.push_back(std::stod(cell));
    }
    if (static_cast<int>(row.size()) != dim + 1) throw Error(Errc::InvalidArgument, "ragged CSV row in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(Errc::InvalidArgument, "CSV has no data rows");
  double lo = kInf, hi = -kInf;
  for (const auto& r : rows) lo = std::min(lo, r[0]), hi = std::max(hi, r[0]);
  const double radius = 0.5 * (hi - lo);
  if (std::abs(hi + lo) > 1e-9 * (1 + radius)) throw Error(Errc::GridNotUniform, "mesh must be symmetric about 0");
  const auto per_axis = static_cast<int>(std::llround(std::pow(static_cast<double>(rows.size()), 1.0 / dim)));
  MeshSpec mesh{dim, per_axis, radius};
  if (mesh.size() != rows.size()) throw Error(Errc::GridNotUniform, "rows do not form a full tensor mesh");
  std::vector<double> values(mesh.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<int> multi(dim);
  for (const auto& r : rows) {
    for (int d = 0; d < dim; ++d) {
      const double u = (r[d] + radius) / mesh.spacing();
      multi[d] = static_cast<int>(std::llround(u));
      if (std::abs(u - multi[d]) > 1e-6) throw Error(Errc::GridNotUniform, "node off the uniform mesh");
    }
    values[mesh.flat_index(multi)] = r[dim];
  }
  for (double v : values)
    if (std::isnan(v)) throw Error(Errc::GridNotUniform, "mesh node missing from CSV");
  return PotentialDensity::tabulated(mesh, std::move(values));
}

}  // namespace wot
