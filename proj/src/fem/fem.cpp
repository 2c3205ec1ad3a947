#include "nsto/fem/fem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "nsto/error.hpp"

namespace nsto::fem {

namespace {

constexpr std::array<double, 2> kGauss = {-0.57735026918962576451, 0.57735026918962576451};

// Natural coordinates of the local nodes, matching Grid::element_nodes order.
constexpr int kCorner[8][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
                               {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1}};

Eigen::MatrixXd constitutive(const Material& m, int dim) {
  const double e = m.youngs_modulus;
  const double nu = m.poisson_ratio;
  if (dim == 2) {
    Eigen::MatrixXd c(3, 3);
    const double f = e / (1.0 - nu * nu);
    c << f, f * nu, 0.0, f * nu, f, 0.0, 0.0, 0.0, f * (1.0 - nu) / 2.0;
    return c;
  }
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(6, 6);
  const double f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c(i, j) = f * (i == j ? 1.0 - nu : nu);
    c(3 + i, 3 + i) = f * (1.0 - 2.0 * nu) / 2.0;
  }
  return c;
}

// Strain-displacement matrix at natural point (xi, eta, zeta).
Eigen::MatrixXd strain_matrix(int dim, std::span<const double> h, double xi, double eta,
                              double zeta) {
  const int nodes = dim == 2 ? 4 : 8;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dim == 2 ? 3 : 6, dim * nodes);
  for (int k = 0; k < nodes; ++k) {
    const double a = kCorner[k][0];
    const double bb = kCorner[k][1];
    double dx, dy, dz = 0.0;
    if (dim == 2) {
      dx = 0.25 * a * (1.0 + bb * eta) * 2.0 / h[0];
      dy = 0.25 * bb * (1.0 + a * xi) * 2.0 / h[1];
      b(0, 2 * k) = dx;
      b(1, 2 * k + 1) = dy;
      b(2, 2 * k) = dy;
      b(2, 2 * k + 1) = dx;
    } else {
      const double c = kCorner[k][2];
      dx = 0.125 * a * (1.0 + bb * eta) * (1.0 + c * zeta) * 2.0 / h[0];
      dy = 0.125 * bb * (1.0 + a * xi) * (1.0 + c * zeta) * 2.0 / h[1];
      dz = 0.125 * c * (1.0 + a * xi) * (1.0 + bb * eta) * 2.0 / h[2];
      const int o = 3 * k;
      b(0, o) = dx;
      b(1, o + 1) = dy;
      b(2, o + 2) = dz;
      b(3, o) = dy;
      b(3, o + 1) = dx;
      b(4, o + 1) = dz;
      b(4, o + 2) = dy;
      b(5, o) = dz;
      b(5, o + 2) = dx;
    }
  }
  return b;
}

void check_density_length(const mesh::Grid& grid, std::size_t n) {
  if (n != static_cast<std::size_t>(grid.n_elements())) {
    throw ShapeError("density field has " + std::to_string(n) + " entries but the grid has " +
                     std::to_string(grid.n_elements()) + " elements");
  }
}

void check_tau(double tau) {
  if (!(tau >= 1.0)) throw InvalidSpecError("SIMP exponent tau must be >= 1");
}

Material unit_modulus(const Material& m) {
  Material unit = m;
  unit.youngs_modulus = 1.0;
  unit.e_min = 0.0;
  return unit;
}

}  // namespace

void Material::validate() const {
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) {
    throw InvalidSpecError("poisson_ratio must be in [0, 0.5), got " +
                           std::to_string(poisson_ratio));
  }
  if (!(e_min > 0.0)) throw InvalidSpecError("e_min must be > 0");
  if (!(youngs_modulus > e_min)) throw InvalidSpecError("youngs_modulus must exceed e_min");
}

ElementKind element_kind_for(const mesh::Grid& grid) {
  return grid.dim() == 2 ? ElementKind::quad4 : ElementKind::hex8;
}

Eigen::MatrixXd element_stiffness(const Material& material, ElementKind kind,
                                  std::span<const double> element_size) {
  if (!(material.poisson_ratio >= 0.0 && material.poisson_ratio < 0.5)) {
    throw InvalidSpecError("poisson_ratio must be in [0, 0.5), got " +
                           std::to_string(material.poisson_ratio));
  }
  const int dim = kind == ElementKind::quad4 ? 2 : 3;
  if (static_cast<int>(element_size.size()) != dim) {
    throw ShapeError("element_size must have one entry per axis");
  }
  const Eigen::MatrixXd c = constitutive(material, dim);
  double det_j = 1.0;
  for (double h : element_size) det_j *= h / 2.0;

  const int n = dim == 2 ? 8 : 24;
  Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(n, n);
  const int nz = dim == 2 ? 1 : 2;
  for (int iz = 0; iz < nz; ++iz) {
    for (int iy = 0; iy < 2; ++iy) {
      for (int ix = 0; ix < 2; ++ix) {
        const double zeta = dim == 2 ? 0.0 : kGauss[iz];
        const Eigen::MatrixXd b = strain_matrix(dim, element_size, kGauss[ix], kGauss[iy], zeta);
        ke.noalias() += b.transpose() * c * b * det_j;
      }
    }
  }
  // Remove round-off asymmetry.
  return 0.5 * (ke + ke.transpose());
}

double stiffness_scale(double rho, double tau, const Material& material) {
  return material.e_min + std::pow(rho, tau) * (material.youngs_modulus - material.e_min);
}

std::vector<double> physical_densities(std::span<const double> density,
                                       std::span<const mesh::Passive> passive) {
  std::vector<double> out(density.begin(), density.end());
  if (passive.empty()) return out;
  if (passive.size() != density.size()) throw ShapeError("passive mask length mismatch");
  for (std::size_t e = 0; e < out.size(); ++e) {
    if (passive[e] == mesh::Passive::void_) out[e] = 0.0;
    if (passive[e] == mesh::Passive::solid) out[e] = 1.0;
  }
  return out;
}

SparseStiffness assemble(const mesh::Grid& grid, std::span<const double> density, double tau,
                         const Material& material, std::span<const mesh::Passive> passive) {
  material.validate();
  check_density_length(grid, density.size());
  check_tau(tau);
  const auto rho = physical_densities(density, passive);
  const Eigen::MatrixXd ke =
      element_stiffness(unit_modulus(material), element_kind_for(grid), grid.element_size());
  const int n = grid.dofs_per_element();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(grid.n_elements()) * n * n);
  for (int e = 0; e < grid.n_elements(); ++e) {
    const auto dofs = grid.element_dofs(e);
    const double s = stiffness_scale(rho[e], tau, material);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) triplets.emplace_back(dofs[i], dofs[j], s * ke(i, j));
    }
  }
  SparseStiffness k(grid.n_dofs(), grid.n_dofs());
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

std::pair<Eigen::VectorXd, linsolve::SolveStats> solve_displacement(
    const SparseStiffness& k, const Eigen::VectorXd& force, std::span<const int> fixed_dofs,
    const linsolve::SolverConfig& config, const mesh::Grid* grid) {
  const int n = static_cast<int>(k.rows());
  if (k.cols() != n || force.size() != n) throw ShapeError("solve_displacement: size mismatch");
  if (fixed_dofs.empty()) throw InvalidSpecError("solve_displacement: no fixed DOFs");
  std::vector<int> map(n, 0);
  for (int dof : fixed_dofs) {
    if (dof < 0 || dof >= n) throw ShapeError("fixed DOF out of range");
    map[dof] = -1;
  }
  std::vector<int> free;
  for (int i = 0; i < n; ++i) {
    if (map[i] == 0) {
      map[i] = static_cast<int>(free.size());
      free.push_back(i);
    }
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(k.nonZeros());
  for (int r = 0; r < n; ++r) {
    if (map[r] < 0) continue;
    for (SparseStiffness::InnerIterator it(k, r); it; ++it) {
      if (map[it.col()] >= 0) triplets.emplace_back(map[r], map[it.col()], it.value());
    }
  }
  const int nf = static_cast<int>(free.size());
  SparseStiffness kff(nf, nf);
  kff.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::VectorXd ff(nf);
  for (int i = 0; i < nf; ++i) ff[i] = force[free[i]];

  std::pair<Eigen::VectorXd, linsolve::SolveStats> reduced;
  if (config.preconditioner == linsolve::PreconditionerKind::multigrid_v) {
    if (grid == nullptr) {
      throw UsageError("multigrid preconditioning needs the structured grid");
    }
    const auto transfers = linsolve::build_grid_transfers(*grid, fixed_dofs);
    const linsolve::MultigridHierarchy hierarchy(kff, transfers, config.smoother_damping,
                                                 config.smoothing_sweeps);
    reduced = linsolve::pcg_solve(kff, ff, config, linsolve::MultigridPreconditioner(hierarchy));
  } else {
    reduced = linsolve::pcg_solve(kff, ff, config);
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < nf; ++i) u[free[i]] = reduced.first[i];
  return {u, reduced.second};
}

std::vector<double> element_energies(const mesh::Grid& grid, const Eigen::MatrixXd& unit_ke,
                                     const Eigen::VectorXd& u) {
  if (u.size() != grid.n_dofs()) throw ShapeError("displacement length mismatch");
  const int n = grid.dofs_per_element();
  std::vector<double> out(grid.n_elements());
  Eigen::VectorXd ue(n);
  for (int e = 0; e < grid.n_elements(); ++e) {
    const auto dofs = grid.element_dofs(e);
    for (int i = 0; i < n; ++i) ue[i] = u[dofs[i]];
    out[e] = ue.dot(unit_ke * ue);
  }
  return out;
}

ComplianceGradient compliance_and_gradient(std::span<const double> density,
                                           const Eigen::VectorXd& u, const mesh::Grid& grid,
                                           double tau, const Material& material,
                                           std::span<const mesh::Passive> passive) {
  check_density_length(grid, density.size());
  check_tau(tau);
  const auto rho = physical_densities(density, passive);
  const Eigen::MatrixXd ke =
      element_stiffness(unit_modulus(material), element_kind_for(grid), grid.element_size());
  const auto energy = element_energies(grid, ke, u);
  ComplianceGradient out;
  out.gradient.resize(rho.size());
  const double range = material.youngs_modulus - material.e_min;
  for (std::size_t e = 0; e < rho.size(); ++e) {
    out.compliance += stiffness_scale(rho[e], tau, material) * energy[e];
    const bool pinned = !passive.empty() && passive[e] != mesh::Passive::free;
    out.gradient[e] = pinned ? 0.0 : -tau * std::pow(rho[e], tau - 1.0) * range * energy[e];
  }
  return out;
}

std::vector<double> element_von_mises(const mesh::Grid& grid, const Material& material,
                                      std::span<const double> density, double tau,
                                      const Eigen::VectorXd& u) {
  check_density_length(grid, density.size());
  const int dim = grid.dim();
  const Eigen::MatrixXd c = constitutive(unit_modulus(material), dim);
  const Eigen::MatrixXd b = strain_matrix(dim, grid.element_size(), 0.0, 0.0, 0.0);
  const int n = grid.dofs_per_element();
  std::vector<double> out(grid.n_elements());
  Eigen::VectorXd ue(n);
  for (int e = 0; e < grid.n_elements(); ++e) {
    const auto dofs = grid.element_dofs(e);
    for (int i = 0; i < n; ++i) ue[i] = u[dofs[i]];
    const Eigen::VectorXd s = stiffness_scale(density[e], tau, material) * (c * (b * ue));
    if (dim == 2) {
      out[e] = std::sqrt(s[0] * s[0] - s[0] * s[1] + s[1] * s[1] + 3.0 * s[2] * s[2]);
    } else {
      const double a = s[0] - s[1];
      const double bb = s[1] - s[2];
      const double cc = s[2] - s[0];
      out[e] = std::sqrt(0.5 * (a * a + bb * bb + cc * cc) +
                         3.0 * (s[3] * s[3] + s[4] * s[4] + s[5] * s[5]));
    }
  }
  return out;
}

FeaSystem::FeaSystem(mesh::Grid grid, Material material, mesh::ResolvedBoundary boundary,
                     linsolve::SolverConfig solver)
    : grid_(std::move(grid)),
      material_(material),
      boundary_(std::move(boundary)),
      solver_(solver) {
  material_.validate();
  solver_.validate();
  if (boundary_.force.size() != grid_.n_dofs() ||
      boundary_.passive.size() != static_cast<std::size_t>(grid_.n_elements())) {
    throw ShapeError("resolved boundary does not match the grid");
  }
  if (boundary_.fixed_dofs.empty()) throw InvalidSpecError("FeaSystem: no fixed DOFs");
  unit_ke_ = element_stiffness(unit_modulus(material_), element_kind_for(grid_),
                               grid_.element_size());

  const int n_dofs = grid_.n_dofs();
  std::vector<int> map(n_dofs, 0);
  for (int dof : boundary_.fixed_dofs) map[dof] = -1;
  for (int i = 0; i < n_dofs; ++i) {
    if (map[i] == 0) {
      map[i] = static_cast<int>(free_dofs_.size());
      free_dofs_.push_back(i);
    }
  }
  const int nf = n_free_dofs();
  reduced_force_.resize(nf);
  for (int i = 0; i < nf; ++i) reduced_force_[i] = boundary_.force[free_dofs_[i]];

  const int n = grid_.dofs_per_element();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(grid_.n_elements()) * n * n);
  for (int e = 0; e < grid_.n_elements(); ++e) {
    const auto dofs = grid_.element_dofs(e);
    for (int i = 0; i < n; ++i) {
      const int r = map[dofs[i]];
      if (r < 0) continue;
      for (int j = 0; j < n; ++j) {
        const int c = map[dofs[j]];
        if (c >= 0) triplets.emplace_back(r, c, 0.0);
      }
    }
  }
  pattern_.resize(nf, nf);
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();

  scatter_.assign(static_cast<std::size_t>(grid_.n_elements()) * n * n, -1);
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (int e = 0; e < grid_.n_elements(); ++e) {
    const auto dofs = grid_.element_dofs(e);
    for (int i = 0; i < n; ++i) {
      const int r = map[dofs[i]];
      if (r < 0) continue;
      for (int j = 0; j < n; ++j) {
        const int c = map[dofs[j]];
        if (c < 0) continue;
        const int* pos = std::lower_bound(inner + outer[r], inner + outer[r + 1], c);
        scatter_[(static_cast<std::size_t>(e) * n + i) * n + j] = static_cast<int>(pos - inner);
      }
    }
  }
  if (solver_.preconditioner == linsolve::PreconditionerKind::multigrid_v) {
    transfers_ = linsolve::build_grid_transfers(grid_, boundary_.fixed_dofs);
  }
}

SparseStiffness FeaSystem::assemble_reduced(std::span<const double> physical_density,
                                            double tau) const {
  check_density_length(grid_, physical_density.size());
  SparseStiffness k = pattern_;
  double* values = k.valuePtr();
  std::fill(values, values + k.nonZeros(), 0.0);
  const int n = grid_.dofs_per_element();
  const double* ke = unit_ke_.data();  // symmetric, so storage order is irrelevant
  for (int e = 0; e < grid_.n_elements(); ++e) {
    const double s = stiffness_scale(physical_density[e], tau, material_);
    const int* idx = scatter_.data() + static_cast<std::size_t>(e) * n * n;
    for (int k2 = 0; k2 < n * n; ++k2) {
      if (idx[k2] >= 0) values[idx[k2]] += s * ke[k2];
    }
  }
  return k;
}

FeaResult FeaSystem::evaluate(std::span<const double> density, double tau) const {
  check_density_length(grid_, density.size());
  check_tau(tau);
  for (double v : density) {
    if (!std::isfinite(v)) throw NumericalError("FeaSystem::evaluate: non-finite density");
  }
  const auto rho = physical_densities(density, boundary_.passive);
  const SparseStiffness k = assemble_reduced(rho, tau);

  std::pair<Eigen::VectorXd, linsolve::SolveStats> reduced;
  if (solver_.preconditioner == linsolve::PreconditionerKind::multigrid_v) {
    const linsolve::MultigridHierarchy hierarchy(k, transfers_, solver_.smoother_damping,
                                                 solver_.smoothing_sweeps);
    reduced =
        linsolve::pcg_solve(k, reduced_force_, solver_, linsolve::MultigridPreconditioner(hierarchy));
  } else {
    reduced = linsolve::pcg_solve(k, reduced_force_, solver_);
  }

  FeaResult out;
  out.stats = std::move(reduced.second);
  out.displacement = Eigen::VectorXd::Zero(grid_.n_dofs());
  for (int i = 0; i < n_free_dofs(); ++i) out.displacement[free_dofs_[i]] = reduced.first[i];

  const auto energy = element_energies(grid_, unit_ke_, out.displacement);
  out.gradient.resize(rho.size());
  const double range = material_.youngs_modulus - material_.e_min;
  for (std::size_t e = 0; e < rho.size(); ++e) {
    out.compliance += stiffness_scale(rho[e], tau, material_) * energy[e];
    out.gradient[e] = boundary_.passive[e] == mesh::Passive::free
                          ? -tau * std::pow(rho[e], tau - 1.0) * range * energy[e]
                          : 0.0;
  }
  return out;
}

}  // namespace nsto::fem
