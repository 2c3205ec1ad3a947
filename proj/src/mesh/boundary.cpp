#include "nsto/mesh/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nsto/error.hpp"

namespace nsto::mesh {

namespace {
constexpr double kContainTol = 1e-9;
}

bool Box::contains(const std::array<double, 3>& p, int dim) const {
  for (int a = 0; a < dim; ++a) {
    if (p[a] < lo[a] - kContainTol || p[a] > hi[a] + kContainTol) return false;
  }
  return true;
}

int ResolvedBoundary::n_free_elements() const {
  return static_cast<int>(std::count(passive.begin(), passive.end(), Passive::free));
}

std::vector<int> select_nodes(const Grid& grid, const Box& box) {
  // Only scan the index range covered by the box.
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};
  for (int a = 0; a < grid.dim(); ++a) {
    const double h = grid.element_size()[a];
    lo[a] = std::max(0, static_cast<int>(std::floor((box.lo[a] - kContainTol) / h)));
    hi[a] = std::min(grid.dims()[a], static_cast<int>(std::ceil((box.hi[a] + kContainTol) / h)));
  }
  std::vector<int> nodes;
  if (grid.dim() == 2) hi[2] = lo[2] = 0;
  for (int k = lo[2]; k <= hi[2]; ++k) {
    for (int j = lo[1]; j <= hi[1]; ++j) {
      for (int i = lo[0]; i <= hi[0]; ++i) {
        const std::array<int, 3> ijk{i, j, k};
        const int n = grid.node_index(ijk);
        if (box.contains(grid.node_position(n), grid.dim())) nodes.push_back(n);
      }
    }
  }
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

ResolvedBoundary resolve_boundary(const Grid& grid, const BoundarySpec& spec) {
  const int d = grid.dim();
  ResolvedBoundary out;
  out.force = Eigen::VectorXd::Zero(grid.n_dofs());
  out.passive.assign(grid.n_elements(), Passive::free);

  for (std::size_t r = 0; r < spec.passive.size(); ++r) {
    const auto& region = spec.passive[r];
    int hits = 0;
    for (int e = 0; e < grid.n_elements(); ++e) {
      if (region.box.contains(grid.element_center(e), d)) {
        out.passive[e] = region.kind;
        ++hits;
      }
    }
    if (hits == 0) {
      throw InvalidSpecError("passive region " + std::to_string(r) + " selects no elements");
    }
  }

  for (std::size_t r = 0; r < spec.fixed.size(); ++r) {
    const auto& region = spec.fixed[r];
    const auto nodes = select_nodes(grid, region.box);
    if (nodes.empty()) {
      throw InvalidSpecError("fixed region " + std::to_string(r) + " selects no nodes");
    }
    for (int n : nodes) {
      for (int c = 0; c < d; ++c) {
        if (region.dofs[c]) out.fixed_dofs.push_back(d * n + c);
      }
    }
  }
  std::sort(out.fixed_dofs.begin(), out.fixed_dofs.end());
  out.fixed_dofs.erase(std::unique(out.fixed_dofs.begin(), out.fixed_dofs.end()),
                       out.fixed_dofs.end());
  if (out.fixed_dofs.empty()) {
    throw InvalidSpecError("boundary has no fixed DOFs; the structure would be free to move");
  }

  // Nodes touching at least one non-void element.
  std::vector<char> supported(grid.n_nodes(), 0);
  for (int e = 0; e < grid.n_elements(); ++e) {
    if (out.passive[e] == Passive::void_) continue;
    const auto nodes = grid.element_nodes(e);
    for (int k = 0; k < grid.nodes_per_element(); ++k) supported[nodes[k]] = 1;
  }

  for (std::size_t r = 0; r < spec.loads.size(); ++r) {
    const auto& region = spec.loads[r];
    const auto nodes = select_nodes(grid, region.box);
    if (nodes.empty()) {
      throw InvalidSpecError("load region " + std::to_string(r) + " selects no nodes");
    }
    const double share =
        region.distribution == LoadDistribution::total ? 1.0 / static_cast<double>(nodes.size())
                                                       : 1.0;
    for (int n : nodes) {
      if (!supported[n]) {
        throw InvalidSpecError("load region " + std::to_string(r) +
                               " touches a node surrounded by passive void");
      }
      for (int c = 0; c < d; ++c) out.force[d * n + c] += share * region.force[c];
    }
  }
  return out;
}

}  // namespace nsto::mesh
