#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsto/fem/fem.hpp"
#include "nsto/linsolve/pcg.hpp"
#include "nsto/mesh/boundary.hpp"
#include "nsto/mesh/grid.hpp"
#include "nsto/neural/optimizer.hpp"

namespace nsto::optimize {

/// One optimization target: a volume fraction and its boundary conditions.
struct Subtask {
  double volume_fraction = 0.3;
  mesh::BoundarySpec boundary;
  std::string label;

  bool operator==(const Subtask&) const = default;
};

/// A design domain with one or more subtasks sharing its grid.
struct Problem {
  mesh::Grid grid;
  fem::Material material;
  linsolve::SolverConfig solver;
  std::vector<Subtask> subtasks;

  void validate() const;
  bool operator==(const Problem&) const = default;
};

struct NetworkConfig {
  int width = 512;
  int depth = 4;  // total layers including the output layer
  double omega = 60.0;
  double alpha = 0.1;
  int latent_dim = 1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

struct TrainConfig {
  int max_epochs = 80;
  double tau_start = 1.5;
  double tau_end = 3.0;
  int tau_ramp_epochs = 50;
  /// Initial penalty. Unset means V0, the number of free elements; the
  /// per-element volume gradient is then 2*lambda*g + 4*sigma*g^3 with
  /// lambda and sigma counted per unit of V0.
  std::optional<double> sigma0;
  double sigma_growth = 1.1;
  double lambda0 = 0.0;
  neural::OptimizerConfig optimizer;
  double compliance_tolerance = 0.003;  // relative change between epochs
  double volume_tolerance = 0.01;       // absolute |V/V0 - delta|
  /// Convergence is only tested once tau has reached tau_end; while the
  /// exponent moves, the objective itself changes between epochs.
  bool stop_on_convergence = true;

  void validate() const;
  /// SIMP exponent used at `epoch`: linear ramp, then constant.
  double tau_at(int epoch) const;
  double initial_sigma(int n_free_elements) const;
  bool operator==(const TrainConfig&) const = default;
};

}  // namespace nsto::optimize
