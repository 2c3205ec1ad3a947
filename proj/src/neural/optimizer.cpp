#include "nsto/neural/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "nsto/error.hpp"

namespace nsto::neural {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidSpecError("optimizer: learning_rate must be > 0");
  if (!(eta_plus > 1.0)) throw InvalidSpecError("optimizer: eta_plus must be > 1");
  if (!(eta_minus > 0.0 && eta_minus < 1.0)) {
    throw InvalidSpecError("optimizer: eta_minus must lie in (0, 1)");
  }
  if (!(step_min > 0.0) || !(step_max() >= step_min)) {
    throw InvalidSpecError("optimizer: need 0 < step_min <= step_max");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidSpecError("optimizer: Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw InvalidSpecError("optimizer: epsilon must be > 0");
}

OptimizerState make_optimizer(const OptimizerConfig& config, Eigen::Index n_parameters) {
  config.validate();
  OptimizerState s;
  s.config = config;
  s.prev_grad = Eigen::VectorXd::Zero(n_parameters);
  if (config.kind == OptimizerKind::rprop) {
    s.step = Eigen::VectorXd::Constant(n_parameters, config.learning_rate);
  } else {
    s.m = Eigen::VectorXd::Zero(n_parameters);
    s.v = Eigen::VectorXd::Zero(n_parameters);
    s.count = Eigen::VectorXi::Zero(n_parameters);
  }
  return s;
}

void optimizer_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, OptimizerState& state,
                    std::span<const char> active) {
  const Eigen::Index n = state.size();
  if (params.size() != n || grad.size() != n) {
    throw ShapeError("optimizer_step: parameter, gradient and state sizes differ");
  }
  if (!active.empty() && static_cast<Eigen::Index>(active.size()) != n) {
    throw ShapeError("optimizer_step: active mask size differs from the parameter count");
  }
  const auto& c = state.config;
  if (c.kind == OptimizerKind::rprop) {
    const double step_max = c.step_max();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!active.empty() && !active[i]) continue;
      double g = grad[i];
      const double prod = g * state.prev_grad[i];
      if (prod > 0.0) {
        state.step[i] = std::min(state.step[i] * c.eta_plus, step_max);
      } else if (prod < 0.0) {
        state.step[i] = std::max(state.step[i] * c.eta_minus, c.step_min);
        g = 0.0;
      }
      if (g > 0.0) {
        params[i] -= state.step[i];
      } else if (g < 0.0) {
        params[i] += state.step[i];
      }
      state.prev_grad[i] = g;
    }
    return;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!active.empty() && !active[i]) continue;
    const double g = grad[i];
    const int t = ++state.count[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / (1.0 - std::pow(c.beta1, t));
    const double v_hat = state.v[i] / (1.0 - std::pow(c.beta2, t));
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    state.prev_grad[i] = g;
  }
}

}  // namespace nsto::neural
