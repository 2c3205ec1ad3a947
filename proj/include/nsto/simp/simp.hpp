#pragma once

#include <span>
#include <vector>

#include "nsto/field.hpp"
#include "nsto/linsolve/pcg.hpp"
#include "nsto/mesh/boundary.hpp"
#include "nsto/mesh/grid.hpp"
#include "nsto/optimize/problem.hpp"
#include "nsto/optimize/training.hpp"

namespace nsto::simp {

struct SimpConfig {
  double penal = 3.0;
  double filter_radius = 1.5;  // in elements
  double move = 0.2;
  double oc_tolerance = 1e-4;  // on V/V0
  int max_iterations = 80;

  void validate() const;
  bool operator==(const SimpConfig&) const = default;
};

/// Cone filter with weights H_ij = max(0, r_min - dist(i, j)), distances in
/// element units between element centers.
class DensityFilter {
 public:
  DensityFilter(const mesh::Grid& grid, double radius);

  /// Symmetric weight matrix H (not normalized).
  const linsolve::SparseMatrix& weights() const noexcept { return h_; }
  const Eigen::VectorXd& row_sums() const noexcept { return hs_; }

  /// (H x) / Hs.
  std::vector<double> apply(std::span<const double> x) const;
  /// Sensitivity filter: (H (x .* dc)) / Hs / max(1e-3, x).
  std::vector<double> filter_sensitivity(std::span<const double> x,
                                         std::span<const double> dc) const;

 private:
  linsolve::SparseMatrix h_;
  Eigen::VectorXd hs_;
};

std::vector<double> density_filter(std::span<const double> field, double radius,
                                   const mesh::Grid& grid);

struct OcResult {
  std::vector<double> density;
  double multiplier = 0.0;
  double volume = 0.0;  // mean over free elements
};

/// Optimality-criteria step x' = clamp(x * sqrt(-dc / (L dv)), x -/+ move, [0, 1])
/// with L found by bisection so the mean free density equals delta within the
/// tolerance. Passive entries are copied (void 0, solid 1) and not counted.
/// Throws NumericalError if no bracket is found within 60 doublings.
OcResult oc_update(std::span<const double> x, std::span<const double> dc,
                   std::span<const double> dv, double delta, const SimpConfig& config,
                   std::span<const mesh::Passive> passive = {});

struct SimpResult {
  DensityField field;
  std::vector<optimize::HistoryRecord> history;
};

/// Filter, FEA, sensitivity filter and OC update per iteration, from a uniform
/// start at delta. Uses the first subtask of the problem. History columns:
/// loss = compliance, lambda = OC multiplier, sigma = 0, tau = penal.
SimpResult simp_optimize(const optimize::Problem& problem, const SimpConfig& config,
                         const optimize::HistorySink& sink = {});

}  // namespace nsto::simp
