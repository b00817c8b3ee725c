#include "wot/interpolation.hpp"

#include <algorithm>
#include <cmath>

namespace wot {

bool MeshInterpolator::contains(const Vec& x, double slack) const {
  for (int d = 0; d < mesh_.dim; ++d) {
    if (!(std::abs(x[d]) <= mesh_.radius * (1.0 + slack))) return false;
  }
  return true;
}

MeshInterpolator::AxisStencil MeshInterpolator::axis_stencil(double coordinate, bool derivative) const {
  const double h = mesh_.spacing();
  const int p = mesh_.points;
  const double u = (coordinate + mesh_.radius) / h;
  const int base = std::clamp(static_cast<int>(std::floor(u)), 0, p - 2);
  const double t = u - base;
  const double t2 = t * t, t3 = t2 * t;

  std::array<double, 4> w{};
  if (derivative) {
    w = {(-3 * t2 + 4 * t - 1) / (2 * h), (9 * t2 - 10 * t) / (2 * h), (-9 * t2 + 8 * t + 1) / (2 * h),
         (3 * t2 - 2 * t) / (2 * h)};
  } else {
    w = {(-t3 + 2 * t2 - t) / 2, (3 * t3 - 5 * t2 + 2) / 2, (-3 * t3 + 4 * t2 + t) / 2, (t3 - t2) / 2};
  }

  AxisStencil s;
  s.index = {base - 1, base, base + 1, base + 2};
  s.weight = w;
  // Ghost nodes: v(-1) = 2 v(0) - v(1), v(p) = 2 v(p-1) - v(p-2).
  if (s.index[0] < 0) {
    s.index[0] = 0;
    s.weight[1] += 2 * w[0];
    s.weight[2] -= w[0];
    s.weight[0] = 0.0;
  }
  if (s.index[3] > p - 1) {
    s.index[3] = p - 1;
    s.weight[2] += 2 * w[3];
    s.weight[1] -= w[3];
    s.weight[3] = 0.0;
  }
  return s;
}

double MeshInterpolator::interpolate(const std::function<double(std::size_t)>& values, const Vec& x,
                                     int deriv_axis) const {
  const int n = mesh_.dim;
  std::array<AxisStencil, 8> stencils;
  for (int d = 0; d < n; ++d) stencils[d] = axis_stencil(x[d], d == deriv_axis);

  std::size_t combos = 1;
  for (int d = 0; d < n; ++d) combos *= 4;
  double total = 0.0;
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rest = c, flat = 0;
    double w = 1.0;
    for (int d = n - 1; d >= 0; --d) {
      const int o = static_cast<int>(rest % 4);
      rest /= 4;
      w *= stencils[d].weight[o];
    }
    if (w == 0.0) continue;
    rest = c;
    std::array<int, 8> digits{};
    for (int d = n - 1; d >= 0; --d) {
      digits[d] = static_cast<int>(rest % 4);
      rest /= 4;
    }
    for (int d = 0; d < n; ++d) flat = flat * mesh_.points + stencils[d].index[digits[d]];
    total += w * values(flat);
  }
  return total;
}

double MeshInterpolator::interpolate(const std::vector<double>& values, const Vec& x, int deriv_axis) const {
  return interpolate([&values](std::size_t i) { return values[i]; }, x, deriv_axis);
}

double MeshInterpolator::interpolate_linear(const std::function<double(std::size_t)>& values, const Vec& x,
                                            int deriv_axis) const {
  const int n = mesh_.dim;
  const double h = mesh_.spacing();
  std::array<int, 8> base{};
  std::array<std::array<double, 2>, 8> w{};
  for (int d = 0; d < n; ++d) {
    const double u = (x[d] + mesh_.radius) / h;
    base[d] = std::clamp(static_cast<int>(std::floor(u)), 0, mesh_.points - 2);
    const double t = u - base[d];
    w[d] = d == deriv_axis ? std::array<double, 2>{-1.0 / h, 1.0 / h} : std::array<double, 2>{1.0 - t, t};
  }
  double total = 0.0;
  for (std::size_t c = 0; c < (std::size_t{1} << n); ++c) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (int d = 0; d < n; ++d) {
      const int o = static_cast<int>((c >> (n - 1 - d)) & 1U);
      weight *= w[d][o];
      flat = flat * mesh_.points + base[d] + o;
    }
    if (weight != 0.0) total += weight * values(flat);
  }
  return total;
}

}  // namespace wot
