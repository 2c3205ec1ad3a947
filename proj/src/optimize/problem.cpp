#include "nsto/optimize/problem.hpp"

#include <cmath>
#include <string>

#include "nsto/error.hpp"

namespace nsto::optimize {

void Problem::validate() const {
  material.validate();
  solver.validate();
  if (subtasks.empty()) throw InvalidSpecError("problem needs at least one subtask");
  for (std::size_t i = 0; i < subtasks.size(); ++i) {
    const double d = subtasks[i].volume_fraction;
    if (!(d > 0.0 && d <= 1.0)) {
      throw InvalidSpecError("subtask " + std::to_string(i) + ": volume_fraction must lie in (0, 1]");
    }
  }
}

void NetworkConfig::validate() const {
  if (width < 1) throw InvalidSpecError("network.width must be >= 1");
  if (depth < 2) throw InvalidSpecError("network.depth must be >= 2");
  if (!(omega > 0.0)) throw InvalidSpecError("network.omega must be > 0");
  if (!(alpha > 0.0)) throw InvalidSpecError("network.alpha must be > 0");
  if (latent_dim < 1 || latent_dim > 2) throw InvalidSpecError("network.latent_dim must be 1 or 2");
}

void TrainConfig::validate() const {
  if (max_epochs < 0) throw InvalidSpecError("train.max_epochs must be >= 0");
  if (!(tau_start >= 1.5 && tau_start <= 3.0) || !(tau_end >= 1.5 && tau_end <= 3.0)) {
    throw InvalidSpecError("train.tau_start and train.tau_end must lie in [1.5, 3]");
  }
  if (tau_ramp_epochs < 0) throw InvalidSpecError("train.tau_ramp_epochs must be >= 0");
  if (sigma0 && !(*sigma0 > 0.0)) throw InvalidSpecError("train.sigma0 must be > 0");
  if (!(sigma_growth > 1.0)) throw InvalidSpecError("train.sigma_growth must be > 1");
  if (!(lambda0 >= 0.0)) throw InvalidSpecError("train.lambda0 must be >= 0");
  if (!(compliance_tolerance > 0.0) || !(volume_tolerance > 0.0)) {
    throw InvalidSpecError("train convergence tolerances must be > 0");
  }
  optimizer.validate();
}

double TrainConfig::tau_at(int epoch) const {
  if (tau_ramp_epochs == 0 || epoch >= tau_ramp_epochs) return tau_end;
  const double t = static_cast<double>(epoch) / tau_ramp_epochs;
  return tau_start + t * (tau_end - tau_start);
}

double TrainConfig::initial_sigma(int n_free_elements) const {
  return sigma0 ? *sigma0 : static_cast<double>(n_free_elements);
}

}  // namespace nsto::optimize
