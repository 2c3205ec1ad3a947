#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Core>

namespace nsto::neural {

enum class OptimizerKind : std::uint8_t { rprop, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::rprop;
  double learning_rate = 1e-4;
  // Rprop
  double eta_plus = 1.2;
  double eta_minus = 0.5;
  double step_min = 1e-6;
  double step_max_factor = 50.0;  // step_max = factor * learning_rate
  // Adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  double step_max() const { return step_max_factor * learning_rate; }
  /// Throws InvalidSpecError on out-of-range hyperparameters.
  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

/// Per-parameter optimizer memory over a flat parameter vector.
///
/// Rprop is the iRprop- variant: the step grows by eta_plus while the gradient
/// keeps its sign, shrinks by eta_minus on a sign change (and that gradient is
/// then treated as zero), and the update is -sign(g) * step.
struct OptimizerState {
  OptimizerConfig config;
  Eigen::VectorXd step;       // Rprop step sizes
  Eigen::VectorXd prev_grad;  // Rprop previous gradient
  Eigen::VectorXd m;          // Adam first moment
  Eigen::VectorXd v;          // Adam second moment
  Eigen::VectorXi count;      // Adam steps taken per entry

  Eigen::Index size() const { return prev_grad.size(); }
  bool operator==(const OptimizerState&) const = default;
};

OptimizerState make_optimizer(const OptimizerConfig& config, Eigen::Index n_parameters);

/// One in-place update. Entries with active[i] == 0 keep both their value and
/// their state, as an optimizer does for a parameter that received no
/// gradient. An empty mask means every entry is active.
void optimizer_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, OptimizerState& state,
                    std::span<const char> active = {});

}  // namespace nsto::neural
