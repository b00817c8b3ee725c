#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "wot/quadrature.hpp"

namespace wot {

// Tensor-product Catmull-Rom interpolation on a MeshSpec. The scheme is
// linear in the nodal data, C^1 across cells, and reproduces quadratics;
// faces use a linearly extrapolated ghost node.
class MeshInterpolator {
 public:
  explicit MeshInterpolator(MeshSpec mesh) : mesh_(mesh) {}

  const MeshSpec& mesh() const { return mesh_; }
  bool contains(const Vec& x, double slack = 1e-12) const;

  // Interpolated value of nodal data `values(flat)`; `deriv_axis` >= 0
  // returns the partial derivative of the interpolant along that axis.
  double interpolate(const std::function<double(std::size_t)>& values, const Vec& x,
                     int deriv_axis = -1) const;
  double interpolate(const std::vector<double>& values, const Vec& x, int deriv_axis = -1) const;
  // Multilinear variant; never leaves the range of the nodal data.
  double interpolate_linear(const std::function<double(std::size_t)>& values, const Vec& x,
                            int deriv_axis = -1) const;

 private:
  struct AxisStencil {
    std::array<int, 4> index{};
    std::array<double, 4> weight{};
  };
  AxisStencil axis_stencil(double coordinate, bool derivative) const;

  MeshSpec mesh_;
};

}  // namespace wot
