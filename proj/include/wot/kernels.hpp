#pragma once

#include <vector>

#include "wot/quadrature.hpp"
#include "wot/types.hpp"

// Log-domain soft-min kernels for Sinkhorn with cost c(x, y) = |x - y|^2 / 2:
//   out_i = -eps * log sum_j exp((g_j - c(x_i, y_j)) / eps + logw_j)
// Terms more than kCutoff below the running maximum are skipped.
namespace wot::kernels {

inline constexpr double kCutoff = 60.0;

// x: dim x N targets, y: dim x M sources.
void softmin_dense(const Mat& x, const Mat& y, const Vec& g, const Vec& logw, double eps, Vec& out);

// Barycentric projection of the coupling a_i b_j exp((u_i + v_j - c_ij)/eps)
// onto rows, normalized per row: bary.col(i) = E[y | x_i].
void barycenter_dense(const Mat& x, const Mat& y, const Vec& u, const Vec& v, const Vec& logw, double eps,
                      Mat& bary, Vec& second_moment);

// Same soft-min on a tensor mesh (x and y both the nodes of `mesh`), done as
// one 1-D pass per axis. `axis_logw` (optional, per axis: mesh.points
// entries) adds a factor depending on the source coordinate along that axis.
void softmin_mesh(const MeshSpec& mesh, const Vec& g, const Vec& logw, double eps, Vec& out,
                  const std::vector<std::vector<double>>* axis_logw = nullptr);

// Finite-difference stencils along one mesh axis, applied to every row of
// `values` (rows x mesh.size()). First derivative: central inside, 3-point
// one-sided on the faces. Second derivative: compact central inside, 4-point
// one-sided on the faces. Both are exact on quadratics.
void fd_first(const MeshSpec& mesh, const Mat& values, int axis, Mat& out);
void fd_second(const MeshSpec& mesh, const Mat& values, int axis, Mat& out);

namespace serial {
void fd_first(const MeshSpec& mesh, const Mat& values, int axis, Mat& out);
void fd_second(const MeshSpec& mesh, const Mat& values, int axis, Mat& out);
void softmin_dense(const Mat& x, const Mat& y, const Vec& g, const Vec& logw, double eps, Vec& out);
void softmin_mesh(const MeshSpec& mesh, const Vec& g, const Vec& logw, double eps, Vec& out,
                  const std::vector<std::vector<double>>* axis_logw = nullptr);
}  // namespace serial

}  // namespace wot::kernels
