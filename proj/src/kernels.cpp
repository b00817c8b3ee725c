#include "wot/kernels.hpp"

#include <cmath>
#include <limits>

namespace wot::kernels {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <bool Parallel>
void dense_impl(const Mat& x, const Mat& y, const Vec& g, const Vec& logw, double eps, Vec& out) {
  const auto n = x.cols(), m = y.cols();
  out.resize(n);
  const double inv = 1.0 / eps;
  Vec h(m);
  for (Eigen::Index j = 0; j < m; ++j) h[j] = g[j] * inv + logw[j];
#pragma omp parallel if (Parallel)
  {
    std::vector<double> t(m);
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      double top = kNegInf;
      for (Eigen::Index j = 0; j < m; ++j) {
        t[j] = h[j] - 0.5 * (x.col(i) - y.col(j)).squaredNorm() * inv;
        if (t[j] > top) top = t[j];
      }
      double s = 0.0;
      for (Eigen::Index j = 0; j < m; ++j)
        if (t[j] > top - kCutoff) s += std::exp(t[j] - top);
      out[i] = -eps * (top + std::log(s));
    }
  }
}

template <bool Parallel>
void mesh_impl(const MeshSpec& mesh, const Vec& g, const Vec& logw, double eps, Vec& out,
               const std::vector<std::vector<double>>* axis_logw) {
  const int P = mesh.points;
  const auto N = static_cast<Eigen::Index>(mesh.size());
  const double inv = 1.0 / eps;
  std::vector<double> klog(static_cast<std::size_t>(P) * P);
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < P; ++j) {
      const double d = mesh.coordinate(i) - mesh.coordinate(j);
      klog[i * P + j] = -0.5 * d * d * inv;
    }
  std::vector<double> work(N), next(N);
  for (Eigen::Index j = 0; j < N; ++j) work[j] = g[j] * inv + logw[j];

  for (int axis = 0; axis < mesh.dim; ++axis) {
    const auto stride = static_cast<Eigen::Index>(mesh.stride(axis));
    const Eigen::Index lines = N / P;
    const double* extra = axis_logw ? (*axis_logw)[axis].data() : nullptr;
#pragma omp parallel if (Parallel)
    {
      std::vector<double> line(P), t(P);
#pragma omp for schedule(static)
      for (Eigen::Index l = 0; l < lines; ++l) {
        // Line l: all nodes sharing every coordinate except `axis`.
        const Eigen::Index outer = l / stride, inner = l % stride;
        const Eigen::Index base = outer * stride * P + inner;
        for (int j = 0; j < P; ++j) line[j] = work[base + j * stride] + (extra ? extra[j] : 0.0);
        for (int i = 0; i < P; ++i) {
          const double* k = &klog[static_cast<std::size_t>(i) * P];
          double top = kNegInf;
          for (int j = 0; j < P; ++j) {
            t[j] = line[j] + k[j];
            if (t[j] > top) top = t[j];
          }
          double s = 0.0;
          if (top != kNegInf)
            for (int j = 0; j < P; ++j)
              if (t[j] > top - kCutoff) s += std::exp(t[j] - top);
          next[base + i * stride] = top == kNegInf ? kNegInf : top + std::log(s);
        }
      }
    }
    work.swap(next);
  }
  out.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) out[i] = -eps * work[i];
}
template <bool Parallel>
void fd_impl(const MeshSpec& mesh, const Mat& values, int axis, Mat& out, bool second) {
  const int P = mesh.points;
  const auto n = values.cols();
  const auto stride = static_cast<Eigen::Index>(mesh.stride(axis));
  const double h = mesh.spacing();
  out.resize(values.rows(), n);
#pragma omp parallel for if (Parallel) schedule(static)
  for (Eigen::Index node = 0; node < n; ++node) {
    const int k = static_cast<int>((node / stride) % P);
    auto at = [&](int offset) { return values.col(node + offset * stride); };
    if (!second) {
      if (k == 0) out.col(node) = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
      else if (k == P - 1) out.col(node) = (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h);
      else out.col(node) = (at(1) - at(-1)) / (2.0 * h);
    } else {
      if (k == 0) out.col(node) = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h);
      else if (k == P - 1) out.col(node) = (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / (h * h);
      else out.col(node) = (at(1) - 2.0 * at(0) + at(-1)) / (h * h);
    }
  }
}
}  // namespace

void fd_first(const MeshSpec& mesh, const Mat& values, int axis, Mat& out) {
  fd_impl<true>(mesh, values, axis, out, false);
}

void fd_second(const MeshSpec& mesh, const Mat& values, int axis, Mat& out) {
  fd_impl<true>(mesh, values, axis, out, true);
}

void softmin_dense(const Mat& x, const Mat& y, const Vec& g, const Vec& logw, double eps, Vec& out) {
  dense_impl<true>(x, y, g, logw, eps, out);
}

void softmin_mesh(const MeshSpec& mesh, const Vec& g, const Vec& logw, double eps, Vec& out,
                  const std::vector<std::vector<double>>* axis_logw) {
  mesh_impl<true>(mesh, g, logw, eps, out, axis_logw);
}

void barycenter_dense(const Mat& x, const Mat& y, const Vec& u, const Vec& v, const Vec& logw, double eps,
                      Mat& bary, Vec& second_moment) {
  const auto n = x.cols(), m = y.cols();
  bary.resize(y.rows(), n);
  second_moment.resize(n);
  const double inv = 1.0 / eps;
#pragma omp parallel
  {
    std::vector<double> t(m);
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      double top = kNegInf;
      for (Eigen::Index j = 0; j < m; ++j) {
        t[j] = (u[i] + v[j] - 0.5 * (x.col(i) - y.col(j)).squaredNorm()) * inv + logw[j];
        if (t[j] > top) top = t[j];
      }
      double s = 0.0, s2 = 0.0;
      Vec acc = Vec::Zero(y.rows());
      for (Eigen::Index j = 0; j < m; ++j) {
        if (!(t[j] > top - kCutoff)) continue;
        const double w = std::exp(t[j] - top);
        s += w;
        acc += w * y.col(j);
        s2 += w * y.col(j).squaredNorm();
      }
      bary.col(i) = acc / s;
      second_moment[i] = s2 / s;
    }
  }
}

namespace serial {
void fd_first(const MeshSpec& mesh, const Mat& values, int axis, Mat& out) {
  fd_impl<false>(mesh, values, axis, out, false);
}

void fd_second(const MeshSpec& mesh, const Mat& values, int axis, Mat& out) {
  fd_impl<false>(mesh, values, axis, out, true);
}

void softmin_dense(const Mat& x, const Mat& y, const Vec& g, const Vec& logw, double eps, Vec& out) {
  dense_impl<false>(x, y, g, logw, eps, out);
}

void softmin_mesh(const MeshSpec& mesh, const Vec& g, const Vec& logw, double eps, Vec& out,
                  const std::vector<std::vector<double>>* axis_logw) {
  mesh_impl<false>(mesh, g, logw, eps, out, axis_logw);
}
}  // namespace serial

}  // namespace wot::kernels
