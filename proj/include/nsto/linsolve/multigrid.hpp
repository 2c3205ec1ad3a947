#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include "nsto/linsolve/pcg.hpp"
#include "nsto/mesh/grid.hpp"

namespace nsto::linsolve {

/// Grid-transfer operators for geometric multigrid on a structured mesh whose
/// fixed DOFs have been eliminated.
///
/// `prolongations[l]` maps free DOFs of level l+1 (coarse) to free DOFs of
/// level l (fine). A coarse DOF is kept only when the coincident fine DOF is
/// free, which keeps every prolongation full column rank.
struct GridTransfers {
  std::vector<SparseMatrix> prolongations;
  std::vector<int> level_dofs;  // free DOF count per level, finest first

  int levels() const { return static_cast<int>(level_dofs.size()); }
};

/// Coarsens by 2 along every axis while all element counts stay even, the
/// level count stays below `max_levels`, and the current level has more than
/// `min_coarse_dofs` free DOFs.
GridTransfers build_grid_transfers(const mesh::Grid& grid, std::span<const int> fixed_dofs,
                                   int max_levels = 10, int min_coarse_dofs = 3000);

/// Galerkin hierarchy A_{l+1} = P_l^T A_l P_l with damped-Jacobi smoothing and a
/// sparse Cholesky solve on the coarsest level.
class MultigridHierarchy {
 public:
  /// Throws InvalidSpecError when the coarsest level of a multi-level hierarchy
  /// is too large or not positive definite.
  MultigridHierarchy(const SparseMatrix& fine, const GridTransfers& transfers, double damping,
                     int sweeps, int max_direct_dofs = 60000);

  int levels() const { return static_cast<int>(operators_.size()); }
  const SparseMatrix& op(int level) const { return operators_[level]; }

  /// One V-cycle applied to `residual` with a zero initial guess.
  Eigen::VectorXd v_cycle(const Eigen::VectorXd& residual) const;

 private:
  Eigen::VectorXd cycle(int level, const Eigen::VectorXd& r) const;
  void smooth(int level, const Eigen::VectorXd& r, Eigen::VectorXd& x) const;

  std::vector<SparseMatrix> operators_;
  std::vector<Eigen::VectorXd> inv_diag_;
  std::vector<SparseMatrix> prolongations_;
  std::vector<SparseMatrix> restrictions_;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> coarse_;
  double damping_;
  int sweeps_;
};

/// One V-cycle of `hierarchy` on `residual`.
Eigen::VectorXd v_cycle_preconditioner(const MultigridHierarchy& hierarchy,
                                       const Eigen::VectorXd& residual);

class MultigridPreconditioner final : public Preconditioner {
 public:
  explicit MultigridPreconditioner(const MultigridHierarchy& hierarchy) : hierarchy_(hierarchy) {}
  void apply(const Eigen::VectorXd& residual, Eigen::VectorXd& correction) const override {
    correction = hierarchy_.v_cycle(residual);
  }

 private:
  const MultigridHierarchy& hierarchy_;
};

}  // namespace nsto::linsolve
