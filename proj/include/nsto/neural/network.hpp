#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace nsto::neural {

/// Affine map y = W x + b with W stored out x in.
struct Layer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  Eigen::Index in() const { return weight.cols(); }
  Eigen::Index out() const { return weight.rows(); }
  bool operator==(const Layer& o) const { return weight == o.weight && bias == o.bias; }
};

/// Sinusoidal coordinate network: hidden layers sin(W h + b), a linear output
/// layer, and the squash rho = atan(alpha * y) / pi + 1/2.
///
/// The frequency scale omega is baked into the first layer at initialization;
/// it is kept here as metadata.
struct OscillatorParams {
  std::vector<Layer> layers;
  double omega = 60.0;
  double alpha = 0.1;

  int input_dim() const { return static_cast<int>(layers.front().in()); }
  int output_dim() const { return static_cast<int>(layers.back().out()); }
  int hidden_layers() const { return static_cast<int>(layers.size()) - 1; }
  /// Throws ShapeError when the layer chain is inconsistent.
  void validate() const;
  bool operator==(const OscillatorParams&) const = default;
};

/// Oscillator plus a ReLU modulator whose i-th layer output multiplies the
/// oscillator's i-th hidden activation, and one trainable latent code per subtask.
struct DualParams {
  OscillatorParams oscillator;
  std::vector<Layer> modulator;
  std::vector<Eigen::VectorXd> latents;

  int latent_dim() const { return static_cast<int>(modulator.front().in()); }
  void validate() const;
  bool operator==(const DualParams&) const = default;
};

/// Sinusoidal-network initialization. Hidden and output weights are drawn from
/// U(-sqrt(6/fan_in), sqrt(6/fan_in)); the first layer from U(-1/fan_in, 1/fan_in)
/// and then multiplied by omega (weights and bias). Biases start in
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)). `depth` counts all layers including the
/// output layer.
OscillatorParams init_oscillator(int input_dim, int width, int depth, double omega,
                                 std::uint64_t seed, int output_dim = 1, double alpha = 0.1);

/// Oscillator as above plus a modulator with one ReLU layer per oscillator
/// hidden layer and `n_latents` codes drawn from a standard normal.
DualParams init_dual(int input_dim, int width, int depth, double omega, int latent_dim,
                     int n_latents, std::uint64_t seed, int output_dim = 1, double alpha = 0.1);

/// Intermediate values of one forward pass, needed by the backward pass.
struct ActivationCache {
  Eigen::MatrixXd input;                    // n x d
  std::vector<Eigen::MatrixXd> pre;         // hidden pre-activations, n x width each
  std::vector<Eigen::MatrixXd> sines;       // sin(pre)
  std::vector<Eigen::MatrixXd> hidden;      // layer outputs (sines, modulated if applicable)
  Eigen::MatrixXd output_pre;               // n x out, argument of the squash
  bool modulated = false;
  Eigen::VectorXd latent;                   // modulator input
  std::vector<Eigen::VectorXd> mod_pre;     // modulator pre-activations
  std::vector<Eigen::VectorXd> mod_out;     // ReLU outputs (the gains)
};

struct ForwardResult {
  Eigen::MatrixXd densities;  // n x out, every entry in (0, 1)
  ActivationCache cache;
};

/// Full-batch forward pass keeping the activations. Throws NumericalError on
/// non-finite parameters.
ForwardResult forward_oscillator(const OscillatorParams& params, const Eigen::MatrixXd& coords);

/// Gradients with the same shapes as `params.layers`.
std::vector<Layer> backward_oscillator(const OscillatorParams& params,
                                       const ActivationCache& cache,
                                       const Eigen::MatrixXd& dl_drho);

/// Modulator gains psi_i(z) for every hidden layer.
std::vector<Eigen::VectorXd> modulator_gains(const std::vector<Layer>& modulator,
                                             const Eigen::VectorXd& z);

ForwardResult forward_modulated(const DualParams& params, const Eigen::MatrixXd& coords,
                                const Eigen::VectorXd& z);

struct DualGradient {
  std::vector<Layer> oscillator;
  std::vector<Layer> modulator;
  Eigen::VectorXd latent;
};

DualGradient backward_modulated(const DualParams& params, const ActivationCache& cache,
                                const Eigen::MatrixXd& dl_drho);

/// Forward pass without a cache, evaluated in row blocks to bound memory.
Eigen::MatrixXd evaluate_oscillator(const OscillatorParams& params, const Eigen::MatrixXd& coords);
Eigen::MatrixXd evaluate_modulated(const DualParams& params, const Eigen::MatrixXd& coords,
                                   const Eigen::VectorXd& z);

/// The output squash and its derivative.
double squash(double y, double alpha);
double squash_derivative(double y, double alpha);

// Flat parameter views used by the optimizers and finite-difference checks.
// Layout: layers in order, each weight row-major followed by its bias.

Eigen::Index parameter_count(const std::vector<Layer>& layers);
Eigen::Index parameter_count(const DualParams& params);

void pack(const std::vector<Layer>& layers, Eigen::VectorXd& out, Eigen::Index offset);
void unpack(const Eigen::VectorXd& in, Eigen::Index offset, std::vector<Layer>& layers);

Eigen::VectorXd flatten(const OscillatorParams& params);
void assign(OscillatorParams& params, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten(const std::vector<Layer>& gradient);

/// Dual layout: oscillator layers, modulator layers, then every latent code.
Eigen::VectorXd flatten(const DualParams& params);
void assign(DualParams& params, const Eigen::VectorXd& flat);
/// Gradient for subtask `active_latent` in the dual layout; other latents get zero.
Eigen::VectorXd flatten(const DualGradient& gradient, const DualParams& params, int active_latent);

}  // namespace nsto::neural
