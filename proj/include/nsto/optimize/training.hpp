#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nsto/field.hpp"
#include "nsto/neural/network.hpp"
#include "nsto/neural/optimizer.hpp"
#include "nsto/optimize/problem.hpp"

namespace nsto::optimize {

/// Augmented Lagrangian L = C + lambda*g^2 + sigma*g^4 with g = V/V0 - delta.
double augmented_lagrangian(double compliance, double volume, double v0, double delta,
                            double lambda, double sigma);

/// Multiplier and penalty of one constraint after k dual updates.
struct DualState {
  double lambda = 0.0;
  double sigma = 1.0;
  int k = 0;

  bool operator==(const DualState&) const = default;
};

/// lambda += 2*sigma_k*g^2, then sigma = sigma0 * growth^(k+1).
DualState dual_update(const DualState& state, double volume, double v0, double delta,
                      double sigma0, double growth);

/// dL/drho per element: dC/drho plus (2*lambda*g + 4*sigma*g^3) / V0 on free
/// elements. Passive elements get zero. `volume` is the sum of free-element
/// densities and `v0` the number of free elements.
std::vector<double> total_density_gradient(std::span<const double> dc_drho, double volume,
                                           double v0, double delta, double lambda, double sigma,
                                           std::span<const mesh::Passive> passive = {});

/// One row of the training log.
struct HistoryRecord {
  int epoch = 0;
  int subtask = 0;
  double loss = 0.0;
  double compliance = 0.0;
  double volume = 0.0;  // V / V0
  double lambda = 0.0;
  double sigma = 0.0;
  double tau = 0.0;
  int solver_iterations = 0;

  bool operator==(const HistoryRecord&) const = default;
};

using HistorySink = std::function<void(const HistoryRecord&)>;

struct ConvergenceThresholds {
  double compliance = 0.003;
  double volume = 0.01;
};

/// True iff the last two entries differ in compliance by at most the relative
/// threshold and the last volume is within the absolute threshold of delta.
/// All entries must belong to one subtask; fewer than two entries give false.
bool check_convergence(std::span<const HistoryRecord> history, double delta,
                       const ConvergenceThresholds& thresholds = {});

enum class ModelKind : std::uint8_t { single, dual };

/// Everything needed to evaluate a trained network on its grid.
struct NetworkModel {
  ModelKind kind = ModelKind::single;
  neural::OscillatorParams oscillator;  // used when kind == single
  neural::DualParams dual;              // used when kind == dual
  mesh::Grid grid;
  std::vector<double> volume_fractions;  // one per subtask
  std::vector<std::string> labels;       // one per subtask

  bool operator==(const NetworkModel&) const = default;
};

struct TrainState {
  std::vector<DualState> duals;  // one per subtask
  double tau = 0.0;
  int epochs = 0;  // completed epochs
  std::vector<HistoryRecord> history;
  bool converged = false;
  int converged_epoch = -1;
};

struct TrainedModel {
  NetworkModel model;
  Problem problem;
  NetworkConfig network;
  TrainConfig train;
  TrainState state;
  std::vector<DensityField> final_densities;  // scale-1 inference, one per subtask
};

/// Single-structure training. The problem must have exactly one subtask.
TrainedModel train_single(const Problem& problem, const NetworkConfig& network,
                          const TrainConfig& train, const HistorySink& sink = {});

/// Multi-subtask training of the modulated network; subtasks are visited in
/// order every epoch, each followed by its own optimizer step and dual update.
TrainedModel train_multi(const Problem& problem, const NetworkConfig& network,
                         const TrainConfig& train, const HistorySink& sink = {});

/// Feed-forward on the scale-times denser grid. A latent is required for dual
/// models and rejected for single ones (UsageError).
DensityField infer(const NetworkModel& model, int scale,
                   const std::optional<Eigen::VectorXd>& latent = std::nullopt);
DensityField infer(const TrainedModel& model, int scale,
                   const std::optional<Eigen::VectorXd>& latent = std::nullopt);

/// V/V0 of a scale-1 field: mean density over elements that are not passive.
double volume_fraction(const DensityField& field, std::span<const mesh::Passive> passive = {});

}  // namespace nsto::optimize
