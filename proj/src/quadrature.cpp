#include "wot/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "wot/error.hpp"

namespace wot {

std::string_view to_string(GridScheme scheme) {
  switch (scheme) {
    case GridScheme::GaussHermiteTensor: return "gauss-hermite-tensor";
    case GridScheme::TruncatedUniform: return "truncated-uniform";
    case GridScheme::MonteCarlo: return "monte-carlo";
  }
  return "unknown";
}

GridScheme grid_scheme_from_string(std::string_view name) {
  if (name == "gauss-hermite-tensor" || name == "gauss-hermite") return GridScheme::GaussHermiteTensor;
  if (name == "truncated-uniform" || name == "uniform") return GridScheme::TruncatedUniform;
  if (name == "monte-carlo") return GridScheme::MonteCarlo;
  throw Error(Errc::InvalidArgument, "unknown grid scheme '" + std::string(name) + "'");
}

std::size_t MeshSpec::size() const {
  std::size_t n = 1;
  for (int d = 0; d < dim; ++d) n *= static_cast<std::size_t>(points);
  return n;
}

std::size_t MeshSpec::stride(int axis) const {
  std::size_t s = 1;
  for (int d = axis + 1; d < dim; ++d) s *= static_cast<std::size_t>(points);
  return s;
}

std::size_t MeshSpec::flat_index(std::span<const int> multi) const {
  std::size_t flat = 0;
  for (int d = 0; d < dim; ++d) flat = flat * points + static_cast<std::size_t>(multi[d]);
  return flat;
}

void MeshSpec::multi_index(std::size_t flat, std::span<int> multi) const {
  for (int d = dim - 1; d >= 0; --d) {
    multi[d] = static_cast<int>(flat % points);
    flat /= points;
  }
}

int MeshSpec::depth(std::size_t flat) const {
  int best = points;
  for (int d = dim - 1; d >= 0; --d) {
    const int k = static_cast<int>(flat % points);
    flat /= points;
    best = std::min({best, k, points - 1 - k});
  }
  return best;
}

QuadratureGrid::QuadratureGrid(GridSpec spec, Mat nodes, std::vector<double> weights)
    : spec_(spec), nodes_(std::move(nodes)), weights_(std::move(weights)) {
  if (nodes_.cols() != static_cast<Eigen::Index>(weights_.size()) || nodes_.rows() != spec_.dim) {
    throw Error(Errc::DimensionMismatch, "node/weight count mismatch");
  }
}

MeshSpec QuadratureGrid::mesh() const {
  if (!is_uniform_mesh()) throw Error(Errc::GridNotUniform, "grid is " + std::string(to_string(scheme())));
  return MeshSpec{spec_.dim, spec_.resolution, spec_.truncation_radius};
}

std::string QuadratureGrid::describe() const {
  std::ostringstream os;
  os << to_string(scheme()) << ":dim=" << dim() << ":res=" << spec_.resolution;
  if (scheme() == GridScheme::TruncatedUniform) os << ":R=" << spec_.truncation_radius;
  if (scheme() == GridScheme::MonteCarlo) os << ":seed=" << spec_.seed;
  return os.str();
}

namespace {

GaussHermiteRule compute_gauss_hermite(int n) {
  // Golub-Welsch for the eigenvalues, then Newton polishing on the
  // orthonormal recurrence; weights from the Christoffel function.
  Mat jacobi = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(jacobi, Eigen::EigenvaluesOnly);
  std::vector<double> x(eig.eigenvalues().data(), eig.eigenvalues().data() + n);

  auto orthonormal = [n](double t, double& pn, double& pn1, double& christoffel) {
    double pm = 0.0, p = 1.0;
    christoffel = 1.0;
    for (int k = 0; k < n; ++k) {
      const double next = (t * p - std::sqrt(static_cast<double>(k)) * pm) / std::sqrt(k + 1.0);
      pm = p;
      p = next;
      if (k + 1 < n) christoffel += p * p;
    }
    pn = p;
    pn1 = pm;
  };

  GaussHermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = x[i];
    double pn = 0, pn1 = 0, ch = 0;
    for (int it = 0; it < 8; ++it) {
      orthonormal(t, pn, pn1, ch);
      const double dp = std::sqrt(static_cast<double>(n)) * pn1;
      if (dp == 0.0) break;
      const double step = pn / dp;
      t -= step;
      if (std::abs(step) < 1e-16 * (1.0 + std::abs(t))) break;
    }
    orthonormal(t, pn, pn1, ch);
    rule.nodes[i] = t;
    rule.weights[i] = 1.0 / ch;
  }
  for (int i = 0; i < n / 2; ++i) {
    const double a = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
    rule.nodes[i] = -a;
    rule.nodes[n - 1 - i] = a;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

GaussLegendreRule compute_gauss_legendre(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 0 ? 1.0 : (n == 1 ? t : p1);
      const double pm = n == 1 ? 1.0 : p0;
      dp = n * (t * pn - pm) / (t * t - 1.0);
      const double step = pn / dp;
      t -= step;
      if (std::abs(step) < 1e-16) break;
    }
    rule.nodes[n - 1 - i] = t;
    rule.weights[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  return rule;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(int n) {
  if (n < 1) throw Error(Errc::ResolutionTooSmall, "Gauss-Hermite needs at least one node");
  if (n > 400) throw Error(Errc::InvalidArgument, "Gauss-Hermite rules are capped at 400 nodes");
  static std::mutex mutex;
  static std::map<int, GaussHermiteRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_hermite(n)).first;
  return it->second;
}

const GaussLegendreRule& gauss_legendre(int n) {
  if (n < 1) throw Error(Errc::ResolutionTooSmall, "Gauss-Legendre needs at least one node");
  static std::mutex mutex;
  static std::map<int, GaussLegendreRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

QuadratureGrid build_grid(const GridSpec& spec) {
  if (spec.dim < 1) throw Error(Errc::InvalidArgument, "dimension must be positive");
  if (spec.resolution < 2) throw Error(Errc::ResolutionTooSmall, "resolution must be at least 2");

  switch (spec.scheme) {
    case GridScheme::GaussHermiteTensor:
    case GridScheme::TruncatedUniform: {
      if (spec.dim > spec.max_tensor_dim) {
        throw Error(Errc::DimensionTooLarge, "tensor grids are capped at dim " + std::to_string(spec.max_tensor_dim));
      }
      const MeshSpec shape{spec.dim, spec.resolution, spec.truncation_radius};
      const double count = std::pow(static_cast<double>(spec.resolution), spec.dim);
      if (count > static_cast<double>(spec.max_nodes)) {
        throw Error(Errc::DimensionTooLarge, "tensor grid would have " + std::to_string(count) + " nodes");
      }
      std::vector<double> axis(spec.resolution), axis_w(spec.resolution);
      if (spec.scheme == GridScheme::GaussHermiteTensor) {
        const auto& rule = gauss_hermite(spec.resolution);
        axis = rule.nodes;
        axis_w = rule.weights;
      } else {
        if (!(spec.truncation_radius > 0)) throw Error(Errc::InvalidArgument, "truncation radius must be positive");
        for (int k = 0; k < spec.resolution; ++k) {
          axis[k] = shape.coordinate(k);
          axis_w[k] = std::exp(-0.5 * axis[k] * axis[k]);
        }
        double total = 0.0;
        for (double w : axis_w) total += w;
        for (double& w : axis_w) w /= total;
      }
      const std::size_t n = shape.size();
      Mat nodes(spec.dim, static_cast<Eigen::Index>(n));
      std::vector<double> weights(n);
      std::vector<int> multi(spec.dim);
      for (std::size_t i = 0; i < n; ++i) {
        shape.multi_index(i, multi);
        double w = 1.0;
        for (int d = 0; d < spec.dim; ++d) {
          nodes(d, static_cast<Eigen::Index>(i)) = axis[multi[d]];
          w *= axis_w[multi[d]];
        }
        weights[i] = w;
      }
      return QuadratureGrid(spec, std::move(nodes), std::move(weights));
    }
    case GridScheme::MonteCarlo: {
      if (spec.dim > 10) throw Error(Errc::DimensionTooLarge, "Monte-Carlo grids are capped at dim 10");
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      const auto n = static_cast<Eigen::Index>(spec.resolution);
      Mat nodes(spec.dim, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (int d = 0; d < spec.dim; ++d) nodes(d, i) = normal(rng);
      return QuadratureGrid(spec, std::move(nodes), std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }
  }
  throw Error(Errc::InvalidArgument, "unreachable grid scheme");
}

GridPtr make_grid(const GridSpec& spec) { return std::make_shared<const QuadratureGrid>(build_grid(spec)); }

GridPtr make_mesh(int dim, int points, double radius) {
  GridSpec spec;
  spec.scheme = GridScheme::TruncatedUniform;
  spec.dim = dim;
  spec.resolution = points;
  spec.truncation_radius = radius;
  spec.max_nodes = 50'000'000;
  return make_grid(spec);
}

GridPtr make_mesh(const MeshSpec& mesh) { return make_mesh(mesh.dim, mesh.points, mesh.radius); }

}  // namespace wot
