#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace nsto::mesh {

/// Structured grid of unit-aspect-free rectangular (2D) or box (3D) elements.
///
/// Nodes and elements are numbered lexicographically with x fastest. DOF k of
/// node n is `dim() * n + k`. Local node order inside an element is
/// counter-clockwise on the bottom face, followed by the top face in 3D:
///
///   2D: (0,0) (1,0) (1,1) (0,1)
///   3D: (0,0,0) (1,0,0) (1,1,0) (0,1,0) (0,0,1) (1,0,1) (1,1,1) (0,1,1)
class Grid {
 public:
  /// A single unit square element.
  Grid() : dims_{1, 1}, element_size_{1.0, 1.0}, n_elements_(1), n_nodes_(4) {}
  Grid(std::span<const int> dims, std::span<const double> element_size);

  int dim() const noexcept { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const noexcept { return dims_; }
  const std::vector<double>& element_size() const noexcept { return element_size_; }

  int n_elements() const noexcept { return n_elements_; }
  int n_nodes() const noexcept { return n_nodes_; }
  int n_dofs() const noexcept { return n_nodes_ * dim(); }
  int nodes_per_element() const noexcept { return dim() == 2 ? 4 : 8; }
  int dofs_per_element() const noexcept { return nodes_per_element() * dim(); }

  /// Node count along `axis` (element count + 1).
  int node_dim(int axis) const { return dims_[axis] + 1; }

  int node_index(std::span<const int> ijk) const;
  std::array<int, 3> node_ijk(int node) const;
  int element_index(std::span<const int> ijk) const;
  std::array<int, 3> element_ijk(int element) const;

  /// Global node indices of an element in local order (4 or 8 valid entries).
  std::array<int, 8> element_nodes(int element) const;
  /// Global DOF indices of an element, node-major (8 or 24 valid entries).
  std::array<int, 24> element_dofs(int element) const;

  /// Physical node position (origin at the lower-left(-back) corner).
  std::array<double, 3> node_position(int node) const;
  /// Physical element-center position.
  std::array<double, 3> element_center(int element) const;
  /// Physical extent of the domain along `axis`.
  double extent(int axis) const { return dims_[axis] * element_size_[axis]; }

  bool operator==(const Grid&) const = default;

 private:
  std::vector<int> dims_;
  std::vector<double> element_size_;
  int n_elements_ = 0;
  int n_nodes_ = 0;
};

Grid build_grid(std::span<const int> dims, std::span<const double> element_size);

/// Convenience overload with unit element size.
Grid build_grid(std::span<const int> dims);

/// The grid refined `scale` times along every axis over the same physical domain.
Grid refine(const Grid& grid, int scale);

/// Element-center network inputs, one row per element of the `scale`-times
/// subdivided grid, normalized per axis to [-1, 1].
struct CoordinateArray {
  Eigen::MatrixXd points;  // n x d
  int scale = 1;
  std::vector<int> dims;   // subdivided element counts
};

CoordinateArray sample_coordinates(const Grid& grid, int scale);

/// Pixel-center coordinates of a height x width raster in [-1, 1]^2, row-major
/// with x (column) fastest.
Eigen::MatrixXd raster_coordinates(int height, int width);

}  // namespace nsto::mesh
