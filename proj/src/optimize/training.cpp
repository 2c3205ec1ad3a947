#include "nsto/optimize/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "nsto/error.hpp"
#include "nsto/fem/fem.hpp"

namespace nsto::optimize {

namespace {

struct VolumeSum {
  double sum = 0.0;
  int count = 0;
};

VolumeSum free_volume(const Eigen::VectorXd& rho, std::span<const mesh::Passive> passive) {
  VolumeSum v;
  for (Eigen::Index e = 0; e < rho.size(); ++e) {
    if (!passive.empty() && passive[e] != mesh::Passive::free) continue;
    v.sum += rho[e];
    ++v.count;
  }
  return v;
}

std::string context(int epoch, int subtask) {
  return "epoch " + std::to_string(epoch) + ", subtask " + std::to_string(subtask) + ": ";
}

// Shared per-subtask step: FEA on rho, loss and dL/drho. Returns the record.
struct SubtaskEval {
  HistoryRecord record;
  Eigen::MatrixXd dl_drho;
};

SubtaskEval evaluate_subtask(const fem::FeaSystem& fea, const Eigen::VectorXd& rho, double delta,
                             const DualState& dual, double tau, int epoch, int subtask) {
  fem::FeaResult res;
  try {
    res = fea.evaluate(std::span<const double>(rho.data(), rho.size()), tau);
  } catch (const NumericalError& e) {
    throw NumericalError(context(epoch, subtask) + e.what());
  }
  const auto& passive = fea.boundary().passive;
  const VolumeSum v = free_volume(rho, passive);
  const double v0 = static_cast<double>(v.count);
  const double loss =
      augmented_lagrangian(res.compliance, v.sum, v0, delta, dual.lambda, dual.sigma);
  if (!std::isfinite(loss)) {
    throw NumericalError(context(epoch, subtask) + "non-finite loss (compliance " +
                         std::to_string(res.compliance) + ")");
  }
  const std::vector<double> grad =
      total_density_gradient(res.gradient, v.sum, v0, delta, dual.lambda, dual.sigma, passive);
  SubtaskEval out;
  out.dl_drho = Eigen::Map<const Eigen::VectorXd>(grad.data(), static_cast<Eigen::Index>(grad.size()));
  out.record = HistoryRecord{epoch,       subtask,     loss, res.compliance,
                             v.sum / v0,  dual.lambda, dual.sigma, tau,
                             res.stats.iterations};
  return out;
}

std::vector<fem::FeaSystem> build_systems(const Problem& problem) {
  std::vector<fem::FeaSystem> systems;
  systems.reserve(problem.subtasks.size());
  for (const auto& s : problem.subtasks) {
    systems.emplace_back(problem.grid, problem.material, mesh::resolve_boundary(problem.grid, s.boundary),
                         problem.solver);
  }
  return systems;
}

NetworkModel model_skeleton(const Problem& problem, ModelKind kind) {
  NetworkModel m;
  m.kind = kind;
  m.grid = problem.grid;
  for (const auto& s : problem.subtasks) {
    m.volume_fractions.push_back(s.volume_fraction);
    m.labels.push_back(s.label);
  }
  return m;
}

// Tracks convergence across subtasks: all must meet the criteria in the same epoch.
class ConvergenceTracker {
 public:
  ConvergenceTracker(std::size_t n, ConvergenceThresholds t) : last_(n), thresholds_(t) {}

  bool update(std::size_t subtask, const HistoryRecord& r, double delta) {
    const std::array<HistoryRecord, 2> pair{last_[subtask].value_or(r), r};
    const bool ok = last_[subtask].has_value() && check_convergence(pair, delta, thresholds_);
    last_[subtask] = r;
    return ok;
  }

 private:
  std::vector<std::optional<HistoryRecord>> last_;
  ConvergenceThresholds thresholds_;
};

void validate_inputs(const Problem& problem, const NetworkConfig& network, const TrainConfig& train) {
  problem.validate();
  network.validate();
  train.validate();
}

}  // namespace

double augmented_lagrangian(double compliance, double volume, double v0, double delta,
                            double lambda, double sigma) {
  if (!(v0 > 0.0)) throw InvalidSpecError("augmented_lagrangian: V0 must be > 0");
  const double g = volume / v0 - delta;
  const double g2 = g * g;
  return compliance + lambda * g2 + sigma * g2 * g2;
}

DualState dual_update(const DualState& state, double volume, double v0, double delta,
                      double sigma0, double growth) {
  if (!(v0 > 0.0)) throw InvalidSpecError("dual_update: V0 must be > 0");
  const double g = volume / v0 - delta;
  DualState next;
  next.lambda = state.lambda + 2.0 * state.sigma * g * g;
  next.k = state.k + 1;
  next.sigma = sigma0 * std::pow(growth, next.k);
  return next;
}

std::vector<double> total_density_gradient(std::span<const double> dc_drho, double volume,
                                           double v0, double delta, double lambda, double sigma,
                                           std::span<const mesh::Passive> passive) {
  if (!(v0 > 0.0)) throw InvalidSpecError("total_density_gradient: V0 must be > 0");
  if (!passive.empty() && passive.size() != dc_drho.size()) {
    throw ShapeError("total_density_gradient: passive mask length differs from the gradient");
  }
  const double g = volume / v0 - delta;
  const double term = (2.0 * lambda * g + 4.0 * sigma * g * g * g) / v0;
  std::vector<double> out(dc_drho.size());
  for (std::size_t e = 0; e < out.size(); ++e) {
    const bool free = passive.empty() || passive[e] == mesh::Passive::free;
    out[e] = free ? dc_drho[e] + term : 0.0;
  }
  return out;
}

bool check_convergence(std::span<const HistoryRecord> history, double delta,
                       const ConvergenceThresholds& thresholds) {
  if (history.size() < 2) return false;
  const auto& prev = history[history.size() - 2];
  const auto& last = history.back();
  const double denom = std::abs(prev.compliance);
  if (!(denom > 0.0)) return false;
  const double change = std::abs(last.compliance - prev.compliance) / denom;
  return change <= thresholds.compliance && std::abs(last.volume - delta) <= thresholds.volume;
}

TrainedModel train_single(const Problem& problem, const NetworkConfig& network,
                          const TrainConfig& train, const HistorySink& sink) {
  validate_inputs(problem, network, train);
  if (problem.subtasks.size() != 1) {
    throw InvalidSpecError("train_single needs exactly one subtask, got " +
                           std::to_string(problem.subtasks.size()));
  }
  const std::vector<fem::FeaSystem> systems = build_systems(problem);
  const fem::FeaSystem& fea = systems.front();
  const double delta = problem.subtasks.front().volume_fraction;
  const double sigma0 = train.initial_sigma(fea.boundary().n_free_elements());
  const Eigen::MatrixXd coords = mesh::sample_coordinates(problem.grid, 1).points;

  TrainedModel out;
  out.problem = problem;
  out.network = network;
  out.train = train;
  out.model = model_skeleton(problem, ModelKind::single);
  auto& params = out.model.oscillator;
  params = neural::init_oscillator(problem.grid.dim(), network.width, network.depth, network.omega,
                                   network.seed, 1, network.alpha);
  Eigen::VectorXd flat = neural::flatten(params);
  neural::OptimizerState opt = neural::make_optimizer(train.optimizer, flat.size());
  auto& state = out.state;
  state.duals = {DualState{train.lambda0, sigma0, 0}};
  state.tau = train.tau_at(0);
  ConvergenceTracker tracker(1, {train.compliance_tolerance, train.volume_tolerance});

  for (int epoch = 0; epoch < train.max_epochs; ++epoch) {
    const double tau = train.tau_at(epoch);
    state.tau = tau;
    neural::ForwardResult fwd = neural::forward_oscillator(params, coords);
    const Eigen::VectorXd rho = fwd.densities.col(0);
    SubtaskEval ev = evaluate_subtask(fea, rho, delta, state.duals[0], tau, epoch, 0);
    const Eigen::VectorXd grad = neural::flatten(neural::backward_oscillator(params, fwd.cache, ev.dl_drho));
    neural::optimizer_step(flat, grad, opt);
    neural::assign(params, flat);

    state.history.push_back(ev.record);
    if (sink) sink(ev.record);
    const double v0 = fea.boundary().n_free_elements();
    state.duals[0] = dual_update(state.duals[0], ev.record.volume * v0, v0, delta, sigma0,
                                 train.sigma_growth);
    state.epochs = epoch + 1;
    const bool met = tracker.update(0, ev.record, delta) && epoch >= train.tau_ramp_epochs;
    if (met && !state.converged) {
      state.converged = true;
      state.converged_epoch = epoch;
      if (train.stop_on_convergence) break;
    }
  }
  out.final_densities.push_back(infer(out.model, 1));
  return out;
}

TrainedModel train_multi(const Problem& problem, const NetworkConfig& network,
                         const TrainConfig& train, const HistorySink& sink) {
  validate_inputs(problem, network, train);
  const int n_sub = static_cast<int>(problem.subtasks.size());
  if (n_sub < 2) throw InvalidSpecError("train_multi needs at least two subtasks");
  const std::vector<fem::FeaSystem> systems = build_systems(problem);
  const Eigen::MatrixXd coords = mesh::sample_coordinates(problem.grid, 1).points;

  TrainedModel out;
  out.problem = problem;
  out.network = network;
  out.train = train;
  out.model = model_skeleton(problem, ModelKind::dual);
  auto& params = out.model.dual;
  params = neural::init_dual(problem.grid.dim(), network.width, network.depth, network.omega,
                             network.latent_dim, n_sub, network.seed, 1, network.alpha);
  Eigen::VectorXd flat = neural::flatten(params);
  neural::OptimizerState opt = neural::make_optimizer(train.optimizer, flat.size());

  // Network weights are shared; each latent only receives updates from its own subtask.
  const Eigen::Index n_net = neural::parameter_count(params.oscillator.layers) +
                             neural::parameter_count(params.modulator);
  std::vector<std::vector<char>> masks(n_sub, std::vector<char>(flat.size(), 0));
  for (int i = 0; i < n_sub; ++i) {
    std::fill(masks[i].begin(), masks[i].begin() + n_net, 1);
    const Eigen::Index start = n_net + static_cast<Eigen::Index>(i) * network.latent_dim;
    std::fill(masks[i].begin() + start, masks[i].begin() + start + network.latent_dim, 1);
  }

  auto& state = out.state;
  std::vector<double> sigma0(n_sub);
  for (int i = 0; i < n_sub; ++i) {
    sigma0[i] = train.initial_sigma(systems[i].boundary().n_free_elements());
    state.duals.push_back(DualState{train.lambda0, sigma0[i], 0});
  }
  state.tau = train.tau_at(0);
  ConvergenceTracker tracker(n_sub, {train.compliance_tolerance, train.volume_tolerance});

  for (int epoch = 0; epoch < train.max_epochs; ++epoch) {
    const double tau = train.tau_at(epoch);
    state.tau = tau;
    bool all_converged = true;
    for (int i = 0; i < n_sub; ++i) {
      const double delta = problem.subtasks[i].volume_fraction;
      neural::ForwardResult fwd = neural::forward_modulated(params, coords, params.latents[i]);
      const Eigen::VectorXd rho = fwd.densities.col(0);
      SubtaskEval ev = evaluate_subtask(systems[i], rho, delta, state.duals[i], tau, epoch, i);
      const neural::DualGradient g = neural::backward_modulated(params, fwd.cache, ev.dl_drho);
      neural::optimizer_step(flat, neural::flatten(g, params, i), opt, masks[i]);
      neural::assign(params, flat);

      state.history.push_back(ev.record);
      if (sink) sink(ev.record);
      const double v0 = systems[i].boundary().n_free_elements();
      state.duals[i] = dual_update(state.duals[i], ev.record.volume * v0, v0, delta, sigma0[i],
                                   train.sigma_growth);
      all_converged = tracker.update(i, ev.record, delta) && all_converged;
    }
    state.epochs = epoch + 1;
    if (all_converged && epoch >= train.tau_ramp_epochs && !state.converged) {
      state.converged = true;
      state.converged_epoch = epoch;
      if (train.stop_on_convergence) break;
    }
  }
  for (int i = 0; i < n_sub; ++i) out.final_densities.push_back(infer(out.model, 1, params.latents[i]));
  return out;
}

DensityField infer(const NetworkModel& model, int scale, const std::optional<Eigen::VectorXd>& latent) {
  if (scale < 1) throw InvalidSpecError("infer: scale must be >= 1");
  mesh::CoordinateArray coords = mesh::sample_coordinates(model.grid, scale);
  DensityField field;
  field.dims = coords.dims;
  field.scale = scale;
  if (model.kind == ModelKind::single) {
    if (latent) throw UsageError("infer: single-network model takes no latent code");
    field.values = neural::evaluate_oscillator(model.oscillator, coords.points).col(0);
  } else {
    if (!latent) throw UsageError("infer: dual-network model needs a latent code");
    field.values = neural::evaluate_modulated(model.dual, coords.points, *latent).col(0);
  }
  return field;
}

DensityField infer(const TrainedModel& model, int scale, const std::optional<Eigen::VectorXd>& latent) {
  return infer(model.model, scale, latent);
}

double volume_fraction(const DensityField& field, std::span<const mesh::Passive> passive) {
  if (!passive.empty() && static_cast<Eigen::Index>(passive.size()) != field.size()) {
    throw ShapeError("volume_fraction: passive mask length differs from the field");
  }
  const VolumeSum v = free_volume(field.values, passive);
  if (v.count == 0) throw InvalidSpecError("volume_fraction: no free elements");
  return v.sum / v.count;
}

}  // namespace nsto::optimize
