#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nsto/linsolve/multigrid.hpp"
#include "nsto/linsolve/pcg.hpp"
#include "nsto/mesh/boundary.hpp"
#include "nsto/mesh/grid.hpp"

namespace nsto::fem {

/// Isotropic linear-elastic material. Stiffness of an element with density rho
/// under penalty tau is `e_min + rho^tau * (E - e_min)` times the unit-modulus
/// element matrix.
struct Material {
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;
  double e_min = 1e-9;

  void validate() const;
  bool operator==(const Material&) const = default;
};

enum class ElementKind : std::uint8_t { quad4, hex8 };

ElementKind element_kind_for(const mesh::Grid& grid);

using SparseStiffness = linsolve::SparseMatrix;

/// Element stiffness K_e = integral of B^T C B over the element, evaluated with
/// 2-point Gauss quadrature per axis (exact for bilinear/trilinear shape
/// functions). Plane stress with unit thickness in 2D.
Eigen::MatrixXd element_stiffness(const Material& material, ElementKind kind,
                                  std::span<const double> element_size);

/// Modified SIMP interpolation e_min + rho^tau (E - e_min).
double stiffness_scale(double rho, double tau, const Material& material);

/// Densities with passive overrides (void -> 0, solid -> 1). An empty mask is a no-op.
std::vector<double> physical_densities(std::span<const double> density,
                                       std::span<const mesh::Passive> passive);

/// Global stiffness on all DOFs (no boundary conditions applied).
SparseStiffness assemble(const mesh::Grid& grid, std::span<const double> density, double tau,
                         const Material& material, std::span<const mesh::Passive> passive = {});

/// Solves K U = F with the fixed DOFs eliminated. The returned U has zeros at
/// the fixed DOFs. Multigrid preconditioning needs the grid; without it the
/// call throws UsageError.
std::pair<Eigen::VectorXd, linsolve::SolveStats> solve_displacement(
    const SparseStiffness& k, const Eigen::VectorXd& force, std::span<const int> fixed_dofs,
    const linsolve::SolverConfig& config, const mesh::Grid* grid = nullptr);

struct ComplianceGradient {
  double compliance = 0.0;
  std::vector<double> gradient;  // dC/drho per element, zero on passive elements
};

/// u_e^T K_e u_e per element with the unit-modulus element matrix.
std::vector<double> element_energies(const mesh::Grid& grid, const Eigen::MatrixXd& unit_ke,
                                     const Eigen::VectorXd& u);

ComplianceGradient compliance_and_gradient(std::span<const double> density,
                                           const Eigen::VectorXd& u, const mesh::Grid& grid,
                                           double tau, const Material& material,
                                           std::span<const mesh::Passive> passive = {});

/// Von Mises stress at every element center (for visualization).
std::vector<double> element_von_mises(const mesh::Grid& grid, const Material& material,
                                      std::span<const double> density, double tau,
                                      const Eigen::VectorXd& u);

struct FeaResult {
  double compliance = 0.0;
  std::vector<double> gradient;  // dC/drho
  Eigen::VectorXd displacement;  // all DOFs
  linsolve::SolveStats stats;
};

/// Precomputed finite-element system for one grid and boundary condition:
/// unit element matrix, reduced sparsity pattern with a per-element scatter
/// map, and multigrid transfer operators. evaluate() is const and thread-safe.
class FeaSystem {
 public:
  FeaSystem(mesh::Grid grid, Material material, mesh::ResolvedBoundary boundary,
            linsolve::SolverConfig solver = {});

  const mesh::Grid& grid() const noexcept { return grid_; }
  const Material& material() const noexcept { return material_; }
  const mesh::ResolvedBoundary& boundary() const noexcept { return boundary_; }
  const linsolve::SolverConfig& solver_config() const noexcept { return solver_; }
  const Eigen::MatrixXd& unit_element_matrix() const noexcept { return unit_ke_; }
  int n_free_dofs() const noexcept { return static_cast<int>(free_dofs_.size()); }

  /// Stiffness restricted to free DOFs.
  SparseStiffness assemble_reduced(std::span<const double> physical_density, double tau) const;

  /// Applies passive overrides, solves, and returns compliance with its density gradient.
  FeaResult evaluate(std::span<const double> density, double tau) const;

 private:
  mesh::Grid grid_;
  Material material_;
  mesh::ResolvedBoundary boundary_;
  linsolve::SolverConfig solver_;
  Eigen::MatrixXd unit_ke_;
  std::vector<int> free_dofs_;
  Eigen::VectorXd reduced_force_;
  SparseStiffness pattern_;
  std::vector<int> scatter_;  // n_elements * dofs_per_element^2, -1 for eliminated entries
  linsolve::GridTransfers transfers_;
};

}  // namespace nsto::fem
