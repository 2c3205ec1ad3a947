#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "nsto/error.hpp"

namespace nsto::linsolve {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

enum class PreconditionerKind : std::uint8_t { jacobi, multigrid_v };

struct SolverConfig {
  double tolerance = 1e-8;     // on ||b - A x|| / ||b||
  int max_iterations = 2000;
  PreconditionerKind preconditioner = PreconditionerKind::multigrid_v;
  double smoother_damping = 0.6;
  int smoothing_sweeps = 2;     // pre and post, per level
  bool record_residuals = false;

  void validate() const;
  bool operator==(const SolverConfig&) const = default;
};

struct SolveStats {
  int iterations = 0;
  double final_relative_residual = 0.0;
  bool converged = false;
  /// sqrt(r^T M^-1 r) after every iteration, index 0 is the initial residual.
  /// Only filled when SolverConfig::record_residuals is set.
  std::vector<double> preconditioned_residuals;
  /// Quadratic functional x^T A x / 2 - b^T x of every iterate (same indexing).
  /// It differs from the squared energy norm of the error by a constant, so CG
  /// keeps it non-increasing.
  std::vector<double> energies;
};

/// Raised when CG stops without reaching the tolerance or produces non-finite values.
class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, SolveStats stats)
      : NumericalError(what), stats_(std::move(stats)) {}
  const SolveStats& stats() const noexcept { return stats_; }

 private:
  SolveStats stats_;
};

/// Symmetric positive definite approximation of A^-1.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual void apply(const Eigen::VectorXd& residual, Eigen::VectorXd& correction) const = 0;
};

class JacobiPreconditioner final : public Preconditioner {
 public:
  explicit JacobiPreconditioner(const SparseMatrix& a);
  void apply(const Eigen::VectorXd& residual, Eigen::VectorXd& correction) const override;

 private:
  Eigen::VectorXd inv_diag_;
};

/// Conjugate gradients with the Jacobi preconditioner.
std::pair<Eigen::VectorXd, SolveStats> pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& rhs,
                                                 const SolverConfig& config);

/// Conjugate gradients with a caller-supplied preconditioner.
std::pair<Eigen::VectorXd, SolveStats> pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& rhs,
                                                 const SolverConfig& config,
                                                 const Preconditioner& preconditioner);

}  // namespace nsto::linsolve
