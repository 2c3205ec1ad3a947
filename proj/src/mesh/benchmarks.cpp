#include "nsto/mesh/benchmarks.hpp"

#include <cmath>

#include "nsto/error.hpp"

namespace nsto::mesh {

namespace {

Box point_box(double x, double y, double z = 0.0) { return Box{{x, y, z}, {x, y, z}}; }

}  // namespace

BoundarySpec mbb_half_beam(const Grid& grid) {
  if (grid.dim() != 2) throw InvalidSpecError("mbb preset is 2D only");
  const double lx = grid.extent(0);
  const double ly = grid.extent(1);
  BoundarySpec spec;
  spec.fixed.push_back({Box{{0.0, 0.0, 0.0}, {0.0, ly, 0.0}}, {true, false, false}});
  spec.fixed.push_back({point_box(lx, 0.0), {false, true, false}});
  spec.loads.push_back({point_box(0.0, ly), {0.0, -1.0, 0.0}, LoadDistribution::per_node});
  return spec;
}

BoundarySpec bridge_half(const Grid& grid) {
  if (grid.dim() != 2) throw InvalidSpecError("bridge preset is 2D only");
  const double lx = grid.extent(0);
  const double ly = grid.extent(1);
  BoundarySpec spec;
  spec.fixed.push_back({Box{{0.0, 0.0, 0.0}, {0.0, ly, 0.0}}, {true, false, false}});
  spec.fixed.push_back({point_box(lx, 0.0), {true, true, false}});
  spec.loads.push_back(
      {Box{{0.0, 0.0, 0.0}, {lx, 0.0, 0.0}}, {0.0, -1.0, 0.0}, LoadDistribution::total});
  return spec;
}

BoundarySpec l_bracket(const Grid& grid) {
  if (grid.dim() != 2) throw InvalidSpecError("lbracket preset is 2D only");
  const double lx = grid.extent(0);
  const double ly = grid.extent(1);
  const double hx = grid.element_size()[0];
  const double hy = grid.element_size()[1];
  BoundarySpec spec;
  // Element centers strictly above/right of the midlines.
  spec.passive.push_back(
      {Box{{0.5 * lx + 0.25 * hx, 0.5 * ly + 0.25 * hy, 0.0}, {lx, ly, 0.0}}, Passive::void_});
  spec.fixed.push_back({Box{{0.0, ly, 0.0}, {0.5 * lx, ly, 0.0}}, {true, true, false}});
  spec.loads.push_back({Box{{lx, 0.4 * ly, 0.0}, {lx, 0.5 * ly, 0.0}}, {0.0, -1.0, 0.0},
                        LoadDistribution::total});
  return spec;
}

BoundarySpec mbb_support_variant(const Grid& grid, int position, int n_positions) {
  if (grid.dim() != 2) throw InvalidSpecError("mbb preset is 2D only");
  if (n_positions < 1 || position < 1 || position > n_positions) {
    throw InvalidSpecError("support position must be in [1, n_positions]");
  }
  const double lx = grid.extent(0);
  const double ly = grid.extent(1);
  const double hx = grid.element_size()[0];
  // Snap to the nearest node column so every station selects a node.
  const double x = std::round(lx * position / n_positions / hx) * hx;
  BoundarySpec spec;
  spec.fixed.push_back({Box{{0.0, 0.0, 0.0}, {0.0, ly, 0.0}}, {true, false, false}});
  spec.fixed.push_back({point_box(x, 0.0), {false, true, false}});
  spec.loads.push_back({point_box(0.0, ly), {0.0, -1.0, 0.0}, LoadDistribution::per_node});
  return spec;
}

BoundarySpec cantilever_3d(const Grid& grid) {
  if (grid.dim() != 3) throw InvalidSpecError("cantilever preset is 3D only");
  const double lx = grid.extent(0);
  const double ly = grid.extent(1);
  const double lz = grid.extent(2);
  BoundarySpec spec;
  spec.fixed.push_back({Box{{0.0, 0.0, 0.0}, {0.0, ly, lz}}, {true, true, true}});
  spec.loads.push_back(
      {Box{{lx, 0.0, 0.0}, {lx, 0.0, lz}}, {0.0, -1.0, 0.0}, LoadDistribution::total});
  return spec;
}

BoundarySpec preset_boundary(const std::string& name, const Grid& grid) {
  if (name == "mbb") return mbb_half_beam(grid);
  if (name == "bridge") return bridge_half(grid);
  if (name == "lbracket") return l_bracket(grid);
  if (name == "cantilever") return cantilever_3d(grid);
  throw InvalidSpecError("unknown boundary preset '" + name + "'");
}

bool is_preset_name(const std::string& name) {
  return name == "mbb" || name == "bridge" || name == "lbracket" || name == "cantilever";
}

}  // namespace nsto::mesh
