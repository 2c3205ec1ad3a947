#pragma once

#include <vector>

#include <Eigen/Core>

namespace nsto {

/// Scalar field on a structured grid, lexicographic with x fastest.
struct DensityField {
  std::vector<int> dims;  // values per axis
  int scale = 1;          // super-resolution factor relative to the optimization grid
  Eigen::VectorXd values;

  Eigen::Index size() const { return values.size(); }
  bool operator==(const DensityField&) const = default;
};

}  // namespace nsto
