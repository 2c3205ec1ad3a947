#pragma once

#include <string>

#include "nsto/mesh/boundary.hpp"
#include "nsto/mesh/grid.hpp"

namespace nsto::mesh {

/// Classic compliance benchmarks. Boxes are expressed relative to the grid
/// extents so the same spec resolves on refined grids.
///
/// Half-domain problems (MBB, bridge) put the symmetry plane at x = 0.

/// Half MBB beam: symmetry on the left edge, roller at the bottom-right corner,
/// unit downward point load at the top-left corner.
BoundarySpec mbb_half_beam(const Grid& grid);

/// Half bridge: symmetry on the left edge, pinned at the bottom-right corner,
/// unit total downward load spread uniformly over the bottom edge.
BoundarySpec bridge_half(const Grid& grid);

/// L-bracket: upper-right quadrant is passive void, top edge of the left arm
/// clamped, unit total downward load on the upper end of the right edge of the
/// lower arm.
BoundarySpec l_bracket(const Grid& grid);

/// Half MBB beam whose roller sits at bottom position `position` of
/// `n_positions` equally spaced stations ending at the right corner (1-based).
BoundarySpec mbb_support_variant(const Grid& grid, int position, int n_positions);

/// 3D cantilever: left face clamped, unit downward load along the bottom edge of
/// the right face.
BoundarySpec cantilever_3d(const Grid& grid);

/// Look up a preset by name: "mbb", "bridge", "lbracket", "cantilever".
BoundarySpec preset_boundary(const std::string& name, const Grid& grid);

bool is_preset_name(const std::string& name);

}  // namespace nsto::mesh
