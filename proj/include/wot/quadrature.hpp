#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wot/types.hpp"

namespace wot {

enum class GridScheme { GaussHermiteTensor, TruncatedUniform, MonteCarlo };

std::string_view to_string(GridScheme scheme);
GridScheme grid_scheme_from_string(std::string_view name);

// Regular tensor mesh on [-radius, radius]^dim with `points` nodes per axis.
// Axis 0 varies slowest in the flat node ordering.
struct MeshSpec {
  int dim = 1;
  int points = 2;
  double radius = 6.0;

  double spacing() const { return 2.0 * radius / (points - 1); }
  double coordinate(int k) const { return -radius + k * spacing(); }
  std::size_t size() const;
  std::size_t stride(int axis) const;
  std::size_t flat_index(std::span<const int> multi) const;
  void multi_index(std::size_t flat, std::span<int> multi) const;
  // Distance in index units to the nearest mesh face.
  int depth(std::size_t flat) const;
  // Mesh with half the spacing; its even-indexed nodes coincide with this one.
  MeshSpec refined() const { return MeshSpec{dim, 2 * points - 1, radius}; }

  bool operator==(const MeshSpec&) const = default;
};

struct GridSpec {
  GridScheme scheme = GridScheme::GaussHermiteTensor;
  int dim = 1;
  int resolution = 20;
  double truncation_radius = 6.0;
  std::uint64_t seed = 0;
  int max_tensor_dim = 4;
  std::size_t max_nodes = 4'000'000;
};

// Nodes and probability weights discretizing the standard Gaussian reference
// measure on R^dim. Immutable once built.
class QuadratureGrid {
 public:
  QuadratureGrid(GridSpec spec, Mat nodes, std::vector<double> weights);

  const GridSpec& spec() const { return spec_; }
  GridScheme scheme() const { return spec_.scheme; }
  int dim() const { return spec_.dim; }
  std::size_t size() const { return weights_.size(); }
  const Mat& nodes() const { return nodes_; }
  auto node(std::size_t i) const { return nodes_.col(static_cast<Eigen::Index>(i)); }
  const std::vector<double>& weights() const { return weights_; }

  bool is_uniform_mesh() const { return spec_.scheme == GridScheme::TruncatedUniform; }
  // Throws GridNotUniform for non-mesh schemes.
  MeshSpec mesh() const;
  std::string describe() const;

 private:
  GridSpec spec_;
  Mat nodes_;
  std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const QuadratureGrid>;

QuadratureGrid build_grid(const GridSpec& spec);
GridPtr make_grid(const GridSpec& spec);
GridPtr make_mesh(int dim, int points, double radius);
GridPtr make_mesh(const MeshSpec& mesh);

// Probabilists' Gauss-Hermite rule: integrates against N(0,1), weights sum to 1.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussHermiteRule& gauss_hermite(int n);

// Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendreRule& gauss_legendre(int n);

}  // namespace wot
