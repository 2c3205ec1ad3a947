#include "nsto/linsolve/pcg.hpp"

#include <cmath>
#include <sstream>

namespace nsto::linsolve {

namespace {

// Plain left-to-right reduction so results never depend on vectorization width
// or thread count.
double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  for (Eigen::Index i = 0; i < a.size(); ++i) s += pa[i] * pb[i];
  return s;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(tolerance > 0.0)) throw InvalidSpecError("solver tolerance must be > 0");
  if (max_iterations < 1) throw InvalidSpecError("solver max_iterations must be >= 1");
  if (!(smoother_damping > 0.0 && smoother_damping <= 1.0)) {
    throw InvalidSpecError("smoother damping must be in (0, 1]");
  }
  if (smoothing_sweeps < 1) throw InvalidSpecError("smoothing sweeps must be >= 1");
}

JacobiPreconditioner::JacobiPreconditioner(const SparseMatrix& a) : inv_diag_(a.rows()) {
  const Eigen::VectorXd d = a.diagonal();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) {
      throw NumericalError("Jacobi preconditioner needs a positive diagonal; row " +
                           std::to_string(i) + " has " + std::to_string(d[i]));
    }
    inv_diag_[i] = 1.0 / d[i];
  }
}

void JacobiPreconditioner::apply(const Eigen::VectorXd& residual,
                                 Eigen::VectorXd& correction) const {
  correction = inv_diag_.cwiseProduct(residual);
}

std::pair<Eigen::VectorXd, SolveStats> pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& rhs,
                                                 const SolverConfig& config) {
  const JacobiPreconditioner jacobi(a);
  return pcg_solve(a, rhs, config, jacobi);
}

std::pair<Eigen::VectorXd, SolveStats> pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& rhs,
                                                 const SolverConfig& config,
                                                 const Preconditioner& preconditioner) {
  config.validate();
  if (a.rows() != a.cols() || a.rows() != rhs.size()) {
    throw ShapeError("pcg_solve: matrix is " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " but rhs has " + std::to_string(rhs.size()) +
                     " entries");
  }
  const Eigen::Index n = rhs.size();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  SolveStats stats;

  const double b_norm = std::sqrt(dot(rhs, rhs));
  if (!std::isfinite(b_norm)) {
    throw SolverError("pcg_solve: right-hand side is not finite", stats);
  }
  if (b_norm == 0.0) {
    stats.converged = true;
    return {x, stats};
  }

  Eigen::VectorXd r = rhs;
  Eigen::VectorXd z(n);
  Eigen::VectorXd ap(n);
  preconditioner.apply(r, z);
  Eigen::VectorXd p = z;
  double rz = dot(r, z);
  if (config.record_residuals) {
    stats.preconditioned_residuals.push_back(std::sqrt(rz));
    stats.energies.push_back(0.0);
  }

  double rel = 1.0;
  while (stats.iterations < config.max_iterations) {
    ap.noalias() = a * p;
    const double p_ap = dot(p, ap);
    const double alpha = rz / p_ap;
    if (!std::isfinite(alpha)) {
      stats.final_relative_residual = rel;
      throw SolverError("pcg_solve diverged (non-finite step) at iteration " +
                            std::to_string(stats.iterations),
                        stats);
    }
    x.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    ++stats.iterations;
    rel = std::sqrt(dot(r, r)) / b_norm;
    if (!std::isfinite(rel)) {
      stats.final_relative_residual = rel;
      throw SolverError("pcg_solve diverged (NaN residual) at iteration " +
                            std::to_string(stats.iterations),
                        stats);
    }
    preconditioner.apply(r, z);
    const double rz_new = dot(r, z);
    if (config.record_residuals) {
      stats.preconditioned_residuals.push_back(std::sqrt(rz_new));
      // x^T A x = x^T (b - r)
      stats.energies.push_back(-0.5 * (dot(x, rhs) + dot(x, r)));
    }
    if (rel <= config.tolerance) {
      stats.converged = true;
      break;
    }
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  stats.final_relative_residual = rel;
  if (!stats.converged) {
    std::ostringstream msg;
    msg << "pcg_solve did not converge: " << stats.iterations
        << " iterations, relative residual " << rel << " > tolerance " << config.tolerance;
    throw SolverError(msg.str(), stats);
  }
  return {x, stats};
}

}  // namespace nsto::linsolve
