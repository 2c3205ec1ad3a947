#include "nsto/mesh/grid.hpp"

#include <string>

#include "nsto/error.hpp"

namespace nsto::mesh {

Grid::Grid(std::span<const int> dims, std::span<const double> element_size)
    : dims_(dims.begin(), dims.end()), element_size_(element_size.begin(), element_size.end()) {
  if (dims_.size() != 2 && dims_.size() != 3) {
    throw InvalidSpecError("grid must have 2 or 3 axes, got " + std::to_string(dims_.size()));
  }
  if (element_size_.size() != dims_.size()) {
    throw InvalidSpecError("element_size must have one entry per axis");
  }
  long long n_el = 1;
  long long n_nd = 1;
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    if (dims_[a] < 1) {
      throw InvalidSpecError("grid dimension " + std::to_string(a) + " must be >= 1, got " +
                             std::to_string(dims_[a]));
    }
    if (!(element_size_[a] > 0.0)) {
      throw InvalidSpecError("element size along axis " + std::to_string(a) + " must be > 0");
    }
    n_el *= dims_[a];
    n_nd *= dims_[a] + 1;
  }
  if (n_nd * static_cast<long long>(dims_.size()) > 0x7fffffffLL) {
    throw InvalidSpecError("grid too large");
  }
  n_elements_ = static_cast<int>(n_el);
  n_nodes_ = static_cast<int>(n_nd);
}

int Grid::node_index(std::span<const int> ijk) const {
  int idx = ijk[dim() - 1];
  for (int a = dim() - 2; a >= 0; --a) idx = idx * node_dim(a) + ijk[a];
  return idx;
}

std::array<int, 3> Grid::node_ijk(int node) const {
  std::array<int, 3> ijk{0, 0, 0};
  for (int a = 0; a < dim(); ++a) {
    ijk[a] = node % node_dim(a);
    node /= node_dim(a);
  }
  return ijk;
}

int Grid::element_index(std::span<const int> ijk) const {
  int idx = ijk[dim() - 1];
  for (int a = dim() - 2; a >= 0; --a) idx = idx * dims_[a] + ijk[a];
  return idx;
}

std::array<int, 3> Grid::element_ijk(int element) const {
  std::array<int, 3> ijk{0, 0, 0};
  for (int a = 0; a < dim(); ++a) {
    ijk[a] = element % dims_[a];
    element /= dims_[a];
  }
  return ijk;
}

std::array<int, 8> Grid::element_nodes(int element) const {
  static constexpr int kOffsets[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                         {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  const auto e = element_ijk(element);
  std::array<int, 8> nodes{};
  for (int k = 0; k < nodes_per_element(); ++k) {
    std::array<int, 3> n{e[0] + kOffsets[k][0], e[1] + kOffsets[k][1], e[2] + kOffsets[k][2]};
    nodes[k] = node_index(n);
  }
  return nodes;
}

std::array<int, 24> Grid::element_dofs(int element) const {
  const auto nodes = element_nodes(element);
  std::array<int, 24> dofs{};
  const int d = dim();
  for (int k = 0; k < nodes_per_element(); ++k) {
    for (int c = 0; c < d; ++c) dofs[d * k + c] = d * nodes[k] + c;
  }
  return dofs;
}

std::array<double, 3> Grid::node_position(int node) const {
  const auto ijk = node_ijk(node);
  std::array<double, 3> p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim(); ++a) p[a] = ijk[a] * element_size_[a];
  return p;
}

std::array<double, 3> Grid::element_center(int element) const {
  const auto ijk = element_ijk(element);
  std::array<double, 3> p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim(); ++a) p[a] = (ijk[a] + 0.5) * element_size_[a];
  return p;
}

Grid build_grid(std::span<const int> dims, std::span<const double> element_size) {
  return Grid(dims, element_size);
}

Grid build_grid(std::span<const int> dims) {
  std::vector<double> unit(dims.size(), 1.0);
  return Grid(dims, unit);
}

Grid refine(const Grid& grid, int scale) {
  if (scale < 1) throw InvalidSpecError("scale must be >= 1, got " + std::to_string(scale));
  std::vector<int> dims = grid.dims();
  std::vector<double> size = grid.element_size();
  for (std::size_t a = 0; a < dims.size(); ++a) {
    dims[a] *= scale;
    size[a] /= scale;
  }
  return Grid(dims, size);
}

CoordinateArray sample_coordinates(const Grid& grid, int scale) {
  if (scale < 1) throw InvalidSpecError("scale must be >= 1, got " + std::to_string(scale));
  const int d = grid.dim();
  CoordinateArray out;
  out.scale = scale;
  out.dims = grid.dims();
  long long n = 1;
  for (auto& v : out.dims) {
    v *= scale;
    n *= v;
  }
  out.points.resize(n, d);
  std::array<int, 3> ijk{0, 0, 0};
  for (Eigen::Index row = 0; row < n; ++row) {
    for (int a = 0; a < d; ++a) {
      out.points(row, a) = -1.0 + (2.0 * ijk[a] + 1.0) / out.dims[a];
    }
    for (int a = 0; a < d; ++a) {
      if (++ijk[a] < out.dims[a]) break;
      ijk[a] = 0;
    }
  }
  return out;
}

Eigen::MatrixXd raster_coordinates(int height, int width) {
  if (height < 1 || width < 1) throw InvalidSpecError("raster must be at least 1x1");
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(height) * width, 2);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Eigen::Index row = static_cast<Eigen::Index>(r) * width + c;
      pts(row, 0) = -1.0 + (2.0 * c + 1.0) / width;
      pts(row, 1) = -1.0 + (2.0 * r + 1.0) / height;
    }
  }
  return pts;
}

}  // namespace nsto::mesh
