#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "nsto/mesh/grid.hpp"

namespace nsto::mesh {

/// Closed axis-aligned box in physical coordinates. Unused trailing axes are ignored.
struct Box {
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{0.0, 0.0, 0.0};

  /// Containment test with a 1e-9 tolerance on every face.
  bool contains(const std::array<double, 3>& p, int dim) const;

  bool operator==(const Box&) const = default;
};

struct FixedRegion {
  Box box;
  std::array<bool, 3> dofs{true, true, true};  // which displacement components are held

  bool operator==(const FixedRegion&) const = default;
};

enum class LoadDistribution : std::uint8_t {
  per_node,  // `force` is applied to every selected node
  total,     // `force` is split evenly over the selected nodes
};

struct LoadRegion {
  Box box;
  std::array<double, 3> force{0.0, 0.0, 0.0};
  LoadDistribution distribution = LoadDistribution::per_node;

  bool operator==(const LoadRegion&) const = default;
};

enum class Passive : std::uint8_t { free = 0, void_ = 1, solid = 2 };

/// Elements whose center lies in `box` are pinned to void or solid.
struct PassiveRegion {
  Box box;
  Passive kind = Passive::void_;

  bool operator==(const PassiveRegion&) const = default;
};

struct BoundarySpec {
  std::vector<FixedRegion> fixed;
  std::vector<LoadRegion> loads;
  std::vector<PassiveRegion> passive;

  bool operator==(const BoundarySpec&) const = default;
};

struct ResolvedBoundary {
  std::vector<int> fixed_dofs;       // sorted, unique
  Eigen::VectorXd force;             // length n_dofs
  std::vector<Passive> passive;      // length n_elements

  int n_free_elements() const;
};

/// Nodes selected by a box.
std::vector<int> select_nodes(const Grid& grid, const Box& box);

/// Turns region selectors into DOF lists, a global load vector and an element mask.
/// Throws InvalidSpecError for regions that select nothing, an empty fixed set, or
/// loads that sit only on passive-void elements.
ResolvedBoundary resolve_boundary(const Grid& grid, const BoundarySpec& spec);

}  // namespace nsto::mesh
