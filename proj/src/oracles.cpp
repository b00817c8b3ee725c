#include "wot/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wot/error.hpp"
#include "wot/interpolation.hpp"

namespace wot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kOrder = 10;  // Gauss-Legendre points per cell

Mat sym_sqrt(const Mat& m, bool inverse) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()));
  Vec ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  if (inverse) ev = ev.cwiseInverse();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

void require_spd(const Mat& cov, const char* name) {
  if (cov.rows() != cov.cols()) throw Error(Errc::DimensionMismatch, std::string(name) + " is not square");
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw Error(Errc::NotSPD, std::string(name) + " is not positive definite");
}

// Barycentric weights for Lagrange interpolation on the reference GL nodes.
const std::vector<double>& barycentric_weights() {
  static const std::vector<double> weights = [] {
    const auto& x = gauss_legendre(kOrder).nodes;
    std::vector<double> w(x.size(), 1.0);
    for (std::size_t j = 0; j < x.size(); ++j)
      for (std::size_t i = 0; i < x.size(); ++i)
        if (i != j) w[j] /= x[j] - x[i];
    return w;
  }();
  return weights;
}

double barycentric(const double* values, double t) {
  const auto& x = gauss_legendre(kOrder).nodes;
  const auto& w = barycentric_weights();
  double num = 0.0, den = 0.0;
  for (int j = 0; j < kOrder; ++j) {
    const double diff = t - x[j];
    if (diff == 0.0) return values[j];
    const double c = w[j] / diff;
    num += c * values[j];
    den += c;
  }
  return num / den;
}
}  // namespace

AffineGaussianMap::AffineGaussianMap(const Vec& mean1, const Mat& cov1, const Vec& mean2, const Mat& cov2)
    : m1_(mean1), m2_(mean2) {
  const auto n = mean1.size();
  if (mean2.size() != n || cov1.rows() != n || cov2.rows() != n) {
    throw Error(Errc::DimensionMismatch, "gaussian pair shapes disagree");
  }
  require_spd(cov1, "cov1");
  require_spd(cov2, "cov2");
  const Mat root1 = sym_sqrt(cov1, false);
  const Mat inv_root1 = sym_sqrt(cov1, true);
  const Mat middle = sym_sqrt(root1 * cov2 * root1, false);
  A_ = inv_root1 * middle * inv_root1;
  A_ = 0.5 * (A_ + A_.transpose());
  Ainv_ = A_.ldlt().solve(Mat::Identity(n, n));
  Ainv_ = 0.5 * (Ainv_ + Ainv_.transpose());
  cost_ = (m1_ - m2_).squaredNorm() + (cov1 + cov2 - 2.0 * middle).trace();
  const Mat G = A_ - Mat::Identity(n, n);
  const Vec c = m2_ - A_ * m1_;
  phi_shift_ = 0.5 * (G * (cov1 + m1_ * m1_.transpose())).trace() + c.dot(m1_);
}

double AffineGaussianMap::phi(const Vec& x) const {
  const Vec c = m2_ - A_ * m1_;
  return 0.5 * x.dot(A_ * x - x) + c.dot(x) - phi_shift_;
}

double AffineGaussianMap::psi(const Vec& y) const {
  const Vec s = backward(y);
  return -phi(s) - 0.5 * (s - y).squaredNorm();
}

// Normalized CDF/survival tables of a 1-D density p(x) = e^{-f(x)} N(x; 0, 1).
class QuantileMap1D::Cdf {
 public:
  Cdf(const PotentialDensity& density, const QuantileOptions& options) : density_(density) {
    constexpr double kScan = 80.0;
    constexpr int kScanPoints = 16001;
    std::vector<double> lp(kScanPoints);
    const double step = 2.0 * kScan / (kScanPoints - 1);
    for (int i = 0; i < kScanPoints; ++i) lp[i] = raw_log(-kScan + i * step);
    peak_ = *std::max_element(lp.begin(), lp.end());
    if (!std::isfinite(peak_)) throw Error(Errc::AllZeroMass, "density vanishes on the scan window");
    const double threshold = peak_ - 700.0;
    int first = 0, last = kScanPoints - 1;
    while (lp[first] <= threshold) ++first;
    while (lp[last] <= threshold) --last;
    for (int i = first; i <= last; ++i) {
      if (lp[i] == -kInf) throw Error(Errc::ZeroDensityRegion, "density vanishes inside its support");
    }
    auto above = [&](double x) { return raw_log(x) > threshold; };
    lo_ = first == 0 ? -kScan : boundary(-kScan + (first - 1) * step, -kScan + first * step, above);
    hi_ = last == kScanPoints - 1 ? kScan : boundary(-kScan + (last + 1) * step, -kScan + last * step, above);

    const int K = options.cells;
    const auto& gl = gauss_legendre(kOrder);
    edges_.resize(K + 1);
    for (int k = 0; k <= K; ++k) edges_[k] = lo_ + (hi_ - lo_) * k / K;
    edges_[K] = hi_;
    std::vector<double> mass(K);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < K; ++k) {
      const double half = 0.5 * (edges_[k + 1] - edges_[k]), mid = 0.5 * (edges_[k + 1] + edges_[k]);
      double m = 0.0;
      for (int j = 0; j < kOrder; ++j) m += gl.weights[j] * half * std::exp(raw_log(mid + half * gl.nodes[j]) - peak_);
      mass[k] = m;
    }
    double total = 0.0;
    for (double m : mass) total += m;
    scale_ = total;
    const double z = std::exp(peak_ - 0.5 * std::log(2.0 * std::numbers::pi)) * total;
    if (options.require_normalized && std::abs(z - 1.0) > options.normalization_tol) {
      throw Error(Errc::NotNormalized, "integral of e^{-f} d beta is " + std::to_string(z));
    }
    F_.assign(K + 1, 0.0);
    G_.assign(K + 1, 0.0);
    for (int k = 0; k < K; ++k) F_[k + 1] = F_[k] + mass[k] / total;
    for (int k = K - 1; k >= 0; --k) G_[k] = G_[k + 1] + mass[k] / total;
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<double>& edges() const { return edges_; }

  double pdf(double x) const {
    if (x < lo_ || x > hi_) return 0.0;
    return std::exp(raw_log(x) - peak_) / scale_;
  }

  double lower(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const int k = cell(x);
    return F_[k] + partial(edges_[k], x);
  }

  double upper(double x) const {
    if (x <= lo_) return 1.0;
    if (x >= hi_) return 0.0;
    const int k = cell(x);
    return G_[k + 1] + partial(x, edges_[k + 1]);
  }

  double inv_lower(double u) const {
    if (u <= 0.0) return lo_;
    if (u >= 1.0) return hi_;
    const int K = static_cast<int>(edges_.size()) - 1;
    int k = static_cast<int>(std::upper_bound(F_.begin(), F_.end(), u) - F_.begin()) - 1;
    k = std::clamp(k, 0, K - 1);
    const double a = edges_[k], b = edges_[k + 1];
    const double frac = (F_[k + 1] > F_[k]) ? (u - F_[k]) / (F_[k + 1] - F_[k]) : 0.5;
    return solve([&](double x) { return F_[k] + partial(a, x) - u; }, a, b, a + frac * (b - a));
  }

  double inv_upper(double s) const {
    if (s <= 0.0) return hi_;
    if (s >= 1.0) return lo_;
    const int K = static_cast<int>(edges_.size()) - 1;
    // G is nonincreasing; find k with G[k+1] <= s < G[k].
    int k = 0;
    {
      int lo = 0, hi = K;
      while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (G_[mid] > s) lo = mid;
        else hi = mid;
      }
      k = lo;
    }
    const double a = edges_[k], b = edges_[k + 1];
    const double frac = (G_[k] > G_[k + 1]) ? (G_[k] - s) / (G_[k] - G_[k + 1]) : 0.5;
    return solve([&](double x) { return s - (G_[k + 1] + partial(x, b)); }, a, b, a + frac * (b - a));
  }

  // Normalized mass of [a, b] inside one cell.
  double partial(double a, double b) const {
    if (b == a) return 0.0;
    const auto& gl = gauss_legendre(kOrder);
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double m = 0.0;
    for (int j = 0; j < kOrder; ++j) m += gl.weights[j] * pdf(mid + half * gl.nodes[j]);
    return m * half;
  }

  int cell(double x) const {
    const int K = static_cast<int>(edges_.size()) - 1;
    const int k = static_cast<int>((x - lo_) / (hi_ - lo_) * K);
    return std::clamp(k, 0, K - 1);
  }

 private:
  double raw_log(double x) const {
    const double f = density_.value(Vec::Constant(1, x));
    if (f == kInf) return -kInf;
    return -f - 0.5 * x * x;
  }

  template <class Pred>
  static double boundary(double outside, double inside, Pred above) {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (outside + inside);
      if (mid == outside || mid == inside) break;
      if (above(mid)) inside = mid;
      else outside = mid;
    }
    return inside;
  }

  // Root of an increasing residual on [a, b]: Newton on the pdf with
  // bisection whenever the step leaves the bracket.
  template <class Residual>
  double solve(Residual r, double a, double b, double x) const {
    for (int it = 0; it < 200; ++it) {
      const double val = r(x);
      if (val == 0.0) return x;
      if (val > 0) b = x;
      else a = x;
      const double d = pdf(x);
      double next = d > 0 ? x - val / d : 0.5 * (a + b);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - x) <= 2e-16 * (1.0 + std::abs(x)) || b - a <= 2e-16 * (1.0 + std::abs(x))) return next;
      x = next;
    }
    return x;
  }

  PotentialDensity density_;
  double peak_ = 0.0;
  double scale_ = 1.0;
  double lo_ = 0.0, hi_ = 0.0;
  std::vector<double> edges_, F_, G_;
};

QuantileMap1D::QuantileMap1D(const PotentialDensity& rho, const PotentialDensity& nu, QuantileOptions options) {
  if (rho.dim() != 1 || nu.dim() != 1) throw Error(Errc::DimensionMismatch, "quantile oracle is 1-D only");
  if (options.cells < 8) throw Error(Errc::ResolutionTooSmall, "quantile oracle needs at least 8 cells");
  rho_ = std::make_unique<Cdf>(rho, options);
  nu_ = std::make_unique<Cdf>(nu, options);

  edges_ = rho_->edges();
  const int K = static_cast<int>(edges_.size()) - 1;
  const auto& gl = gauss_legendre(kOrder);
  D_.assign(static_cast<std::size_t>(K) * kOrder, 0.0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k) {
    const double half = 0.5 * (edges_[k + 1] - edges_[k]), mid = 0.5 * (edges_[k + 1] + edges_[k]);
    for (int j = 0; j < kOrder; ++j) {
      const double x = mid + half * gl.nodes[j];
      D_[k * kOrder + j] = T(x) - x;
    }
  }
  primitive_.assign(K + 1, 0.0);
  for (int k = 0; k < K; ++k) {
    const double half = 0.5 * (edges_[k + 1] - edges_[k]);
    double s = 0.0;
    for (int j = 0; j < kOrder; ++j) s += gl.weights[j] * D_[k * kOrder + j];
    primitive_[k + 1] = primitive_[k] + half * s;
  }
  // Per-cell partial sums, reduced serially so the result is thread-count independent.
  std::vector<double> cell_mean(K, 0.0), cell_cost(K, 0.0);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < K; ++k) {
    const double half = 0.5 * (edges_[k + 1] - edges_[k]), mid = 0.5 * (edges_[k + 1] + edges_[k]);
    for (int j = 0; j < kOrder; ++j) {
      const double x = mid + half * gl.nodes[j];
      const double w = gl.weights[j] * half * rho_->pdf(x);
      cell_mean[k] += w * primitive(x);
      cell_cost[k] += w * D_[k * kOrder + j] * D_[k * kOrder + j];
    }
  }
  double mean = 0.0, cost = 0.0;
  for (int k = 0; k < K; ++k) {
    mean += cell_mean[k];
    cost += cell_cost[k];
  }
  phi_shift_ = mean;
  cost_ = cost;
}

QuantileMap1D::~QuantileMap1D() = default;

double QuantileMap1D::T(double x) const {
  if (x <= rho_->lo()) return nu_->lo();
  if (x >= rho_->hi()) return nu_->hi();
  const double u = rho_->lower(x);
  if (u <= 0.5) return nu_->inv_lower(u);
  return nu_->inv_upper(rho_->upper(x));
}

double QuantileMap1D::S(double y) const {
  if (y <= nu_->lo()) return rho_->lo();
  if (y >= nu_->hi()) return rho_->hi();
  const double u = nu_->lower(y);
  if (u <= 0.5) return rho_->inv_lower(u);
  return rho_->inv_upper(nu_->upper(y));
}

double QuantileMap1D::dT(double x) const {
  const double p = rho_->pdf(x);
  if (p == 0.0) return 0.0;
  const double q = nu_->pdf(T(x));
  return q > 0 ? p / q : kInf;
}

double QuantileMap1D::dS(double y) const {
  const double q = nu_->pdf(y);
  if (q == 0.0) return 0.0;
  const double p = rho_->pdf(S(y));
  return p > 0 ? q / p : kInf;
}

double QuantileMap1D::primitive(double x) const {
  const double lo = edges_.front(), hi = edges_.back();
  if (x <= lo) return nu_->lo() * (x - lo) - 0.5 * (x * x - lo * lo);
  if (x >= hi) return primitive_.back() + nu_->hi() * (x - hi) - 0.5 * (x * x - hi * hi);
  const int k = rho_->cell(x);
  const double a = edges_[k], b = edges_[k + 1];
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  const double sub_half = 0.5 * (x - a), sub_mid = 0.5 * (x + a);
  const auto& gl = gauss_legendre(kOrder);
  double s = 0.0;
  for (int j = 0; j < kOrder; ++j) {
    const double t = (sub_mid + sub_half * gl.nodes[j] - mid) / half;
    s += gl.weights[j] * barycentric(&D_[static_cast<std::size_t>(k) * kOrder], t);
  }
  return primitive_[k] + sub_half * s;
}

double QuantileMap1D::phi(double x) const { return primitive(x) - phi_shift_; }

double QuantileMap1D::psi(double y) const {
  const double s = S(y);
  return -phi(s) - 0.5 * (s - y) * (s - y);
}

SeparableMap::SeparableMap(std::vector<MapPtr> factors) : factors_(std::move(factors)) {
  for (const auto& f : factors_)
    if (!f || f->dim() != 1) throw Error(Errc::NotSeparable, "separable map factors must be 1-D");
}

double SeparableMap::phi(const Vec& x) const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += factors_[i]->phi(x.segment(i, 1));
  return s;
}

double SeparableMap::psi(const Vec& y) const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += factors_[i]->psi(y.segment(i, 1));
  return s;
}

Vec SeparableMap::forward(const Vec& x) const {
  Vec out(dim());
  for (int i = 0; i < dim(); ++i) out[i] = factors_[i]->forward(x.segment(i, 1))[0];
  return out;
}

Vec SeparableMap::backward(const Vec& y) const {
  Vec out(dim());
  for (int i = 0; i < dim(); ++i) out[i] = factors_[i]->backward(y.segment(i, 1))[0];
  return out;
}

Mat SeparableMap::forward_jacobian(const Vec& x) const {
  Mat out = Mat::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i) out(i, i) = factors_[i]->forward_jacobian(x.segment(i, 1))(0, 0);
  return out;
}

Mat SeparableMap::backward_jacobian(const Vec& y) const {
  Mat out = Mat::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i) out(i, i) = factors_[i]->backward_jacobian(y.segment(i, 1))(0, 0);
  return out;
}

double SeparableMap::cost() const {
  double s = 0.0;
  for (const auto& f : factors_) s += f->cost();
  return s;
}

TabulatedMap1D::TabulatedMap1D(MeshSpec mesh, std::vector<double> phi, std::vector<double> psi, std::vector<double> T,
                               std::vector<double> S, double cost, std::string tag)
    : mesh_(mesh), phi_(std::move(phi)), psi_(std::move(psi)), T_(std::move(T)), S_(std::move(S)), cost_(cost),
      tag_(std::move(tag)) {
  if (mesh_.dim != 1) throw Error(Errc::DimensionMismatch, "tabulated map is 1-D");
  const auto n = mesh_.size();
  if (phi_.size() != n || psi_.size() != n || T_.size() != n || S_.size() != n) {
    throw Error(Errc::DimensionMismatch, "tabulated map tables do not match the mesh");
  }
}

namespace {
// Value of a potential whose gradient table is `map`; beyond the mesh the map
// is frozen at its face value and the potential extended accordingly.
double extended_potential(const MeshSpec& mesh, const std::vector<double>& pot, const std::vector<double>& map,
                          double x) {
  const MeshInterpolator interp(mesh);
  const double r = mesh.radius;
  const double c = std::clamp(x, -r, r);
  const double base = interp.interpolate(pot, Vec::Constant(1, c));
  if (c == x) return base;
  const double edge_map = x > 0 ? map.back() : map.front();
  return base + edge_map * (x - c) - 0.5 * (x * x - c * c);
}
}  // namespace

double TabulatedMap1D::phi(const Vec& x) const { return extended_potential(mesh_, phi_, T_, x[0]); }
double TabulatedMap1D::psi(const Vec& y) const { return extended_potential(mesh_, psi_, S_, y[0]); }

Vec TabulatedMap1D::forward(const Vec& x) const {
  const double c = std::clamp(x[0], -mesh_.radius, mesh_.radius);
  return Vec::Constant(1, MeshInterpolator(mesh_).interpolate(T_, Vec::Constant(1, c)));
}

Vec TabulatedMap1D::backward(const Vec& y) const {
  const double c = std::clamp(y[0], -mesh_.radius, mesh_.radius);
  return Vec::Constant(1, MeshInterpolator(mesh_).interpolate(S_, Vec::Constant(1, c)));
}

Mat TabulatedMap1D::forward_jacobian(const Vec& x) const {
  if (std::abs(x[0]) > mesh_.radius) return Mat::Zero(1, 1);
  return Mat::Constant(1, 1, MeshInterpolator(mesh_).interpolate(T_, x, 0));
}

Mat TabulatedMap1D::backward_jacobian(const Vec& y) const {
  if (std::abs(y[0]) > mesh_.radius) return Mat::Zero(1, 1);
  return Mat::Constant(1, 1, MeshInterpolator(mesh_).interpolate(S_, y, 0));
}

TransportSolution tabulate(const MapPtr& map, const GridPtr& grid) {
  if (map->dim() != grid->dim()) throw Error(Errc::DimensionMismatch, "map and grid dimensions differ");
  TransportSolution sol;
  sol.solver_tag = map->tag();
  sol.cost = map->cost();
  sol.grid = grid;
  sol.map = map;
  const auto n = static_cast<std::ptrdiff_t>(grid->size());
  sol.phi.resize(n);
  sol.psi.resize(n);
  sol.T.resize(grid->dim(), n);
  sol.S.resize(grid->dim(), n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Vec x = grid->node(i);
    sol.phi[i] = map->phi(x);
    sol.psi[i] = map->psi(x);
    sol.T.col(i) = map->forward(x);
    sol.S.col(i) = map->backward(x);
  }
  return sol;
}

nlohmann::json to_json(const TransportSolution& solution) {
  nlohmann::json j;
  j["solver_tag"] = solution.solver_tag;
  j["cost"] = solution.cost;
  j["cost_convention"] = kCostConvention;
  j["grid_ref"] = solution.grid ? solution.grid->describe() : "";
  j["phi"] = solution.phi;
  j["psi"] = solution.psi;
  auto columns = [](const Mat& m) {
    std::vector<std::vector<double>> out(m.cols());
    for (Eigen::Index i = 0; i < m.cols(); ++i) out[i].assign(m.col(i).data(), m.col(i).data() + m.rows());
    return out;
  };
  j["T"] = columns(solution.T);
  j["S"] = columns(solution.S);
  return j;
}

std::optional<GaussianPair> gaussian_pair(const PotentialDensity& rho, const PotentialDensity& nu) {
  auto a = rho.gaussian_moments();
  auto b = nu.gaussian_moments();
  if (!a || !b || rho.dim() != nu.dim()) return std::nullopt;
  return GaussianPair{a->first, b->first, a->second, b->second};
}

MapPtr gaussian_map(const GaussianPair& pair) {
  return std::make_shared<AffineGaussianMap>(pair.mean1, pair.cov1, pair.mean2, pair.cov2);
}

MapPtr quantile_map(const PotentialDensity& rho, const PotentialDensity& nu, QuantileOptions options) {
  return std::make_shared<QuantileMap1D>(rho, nu, options);
}

MapPtr separable_map(const PotentialDensity& rho, const PotentialDensity& nu, QuantileOptions options) {
  if (rho.dim() != nu.dim()) throw Error(Errc::DimensionMismatch, "separable pair dimensions differ");
  auto fr = rho.factors();
  auto fn = nu.factors();
  if (!fr || !fn) throw Error(Errc::NotSeparable, "densities do not factorize coordinatewise");
  options.require_normalized = false;
  std::vector<MapPtr> maps;
  for (std::size_t i = 0; i < fr->size(); ++i) maps.push_back(quantile_map((*fr)[i], (*fn)[i], options));
  return std::make_shared<SeparableMap>(std::move(maps));
}

TransportSolution solve_gaussian(const GaussianPair& pair, const GridPtr& grid) {
  return tabulate(gaussian_map(pair), grid);
}

TransportSolution solve_1d(const PotentialDensity& rho, const PotentialDensity& nu, const GridPtr& grid) {
  return tabulate(quantile_map(rho, nu), grid);
}

TransportSolution solve_separable(const PotentialDensity& rho, const PotentialDensity& nu, const GridPtr& grid) {
  return tabulate(separable_map(rho, nu), grid);
}

}  // namespace wot
