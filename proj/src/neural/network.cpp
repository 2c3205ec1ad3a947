#include "nsto/neural/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "nsto/error.hpp"

namespace nsto::neural {

namespace {

constexpr Eigen::Index kEvalBlock = 4096;

Layer uniform_layer(int in, int out, double weight_bound, double bias_bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> w(-weight_bound, weight_bound);
  std::uniform_real_distribution<double> b(-bias_bound, bias_bound);
  Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) layer.weight(r, c) = w(rng);
  }
  for (int r = 0; r < out; ++r) layer.bias[r] = b(rng);
  return layer;
}

void check_finite(const std::vector<Layer>& layers, const char* what) {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw NumericalError(std::string(what) + ": non-finite network parameter");
    }
  }
}

void check_chain(const std::vector<Layer>& layers, const char* what) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].bias.size() != layers[i].out()) {
      throw ShapeError(std::string(what) + ": bias length mismatch in layer " + std::to_string(i));
    }
    if (i > 0 && layers[i].in() != layers[i - 1].out()) {
      throw ShapeError(std::string(what) + ": layer " + std::to_string(i) +
                       " input does not match the previous output");
    }
  }
}

// Shared forward body; `gains` is null for the plain oscillator.
Eigen::MatrixXd run_forward(const OscillatorParams& osc, const std::vector<Eigen::VectorXd>* gains,
                            const Eigen::MatrixXd& coords, ActivationCache* cache) {
  if (coords.cols() != osc.input_dim()) {
    throw ShapeError("forward: coordinates have " + std::to_string(coords.cols()) +
                     " columns, network expects " + std::to_string(osc.input_dim()));
  }
  const int hidden = osc.hidden_layers();
  Eigen::MatrixXd h = coords;
  if (cache) {
    cache->input = coords;
    cache->pre.resize(hidden);
    cache->hidden.resize(hidden);
    cache->sines.resize(gains ? hidden : 0);
  }
  for (int i = 0; i < hidden; ++i) {
    const Layer& layer = osc.layers[i];
    Eigen::MatrixXd z = h * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    Eigen::MatrixXd s = z.array().sin().matrix();
    if (gains) {
      Eigen::MatrixXd modulated = s;
      modulated.array().rowwise() *= (*gains)[i].transpose().array();
      if (cache) {
        cache->sines[i] = std::move(s);
        cache->pre[i] = std::move(z);
        cache->hidden[i] = modulated;
      }
      h = std::move(modulated);
    } else {
      if (cache) {
        cache->pre[i] = std::move(z);
        cache->hidden[i] = s;
      }
      h = std::move(s);
    }
  }
  const Layer& last = osc.layers.back();
  Eigen::MatrixXd y = h * last.weight.transpose();
  y.rowwise() += last.bias.transpose();
  Eigen::MatrixXd rho = y.unaryExpr([a = osc.alpha](double v) { return squash(v, a); });
  if (cache) cache->output_pre = std::move(y);
  return rho;
}

// Backward through the oscillator. Fills `dgains` with dL/dpsi_i when modulated.
std::vector<Layer> run_backward(const OscillatorParams& osc, const ActivationCache& cache,
                                const Eigen::MatrixXd& dl_drho,
                                const std::vector<Eigen::VectorXd>* gains,
                                std::vector<Eigen::VectorXd>* dgains) {
  const int hidden = osc.hidden_layers();
  if (dl_drho.rows() != cache.output_pre.rows() || dl_drho.cols() != cache.output_pre.cols()) {
    throw ShapeError("backward: dL/drho is " + std::to_string(dl_drho.rows()) + "x" +
                     std::to_string(dl_drho.cols()) + ", forward output was " +
                     std::to_string(cache.output_pre.rows()) + "x" +
                     std::to_string(cache.output_pre.cols()));
  }
  if (static_cast<int>(cache.pre.size()) != hidden) {
    throw ShapeError("backward: activation cache does not match the network depth");
  }
  std::vector<Layer> grad(osc.layers.size());
  const double alpha = osc.alpha;
  Eigen::MatrixXd dy = dl_drho.array() * cache.output_pre.unaryExpr([alpha](double v) {
    return squash_derivative(v, alpha);
  }).array();

  const auto& input_of = [&](int layer) -> const Eigen::MatrixXd& {
    return layer == 0 ? cache.input : cache.hidden[layer - 1];
  };

  grad.back().weight = dy.transpose() * input_of(hidden);
  grad.back().bias = dy.colwise().sum().transpose();
  Eigen::MatrixXd dh = dy * osc.layers.back().weight;

  if (dgains) dgains->resize(hidden);
  for (int i = hidden - 1; i >= 0; --i) {
    Eigen::MatrixXd dz;
    if (gains) {
      (*dgains)[i] = (dh.array() * cache.sines[i].array()).colwise().sum().transpose();
      dh.array().rowwise() *= (*gains)[i].transpose().array();
    }
    dz = dh.array() * cache.pre[i].array().cos();
    grad[i].weight = dz.transpose() * input_of(i);
    grad[i].bias = dz.colwise().sum().transpose();
    if (i > 0) dh = dz * osc.layers[i].weight;
  }
  return grad;
}

}  // namespace

double squash(double y, double alpha) { return std::atan(alpha * y) / std::numbers::pi + 0.5; }

double squash_derivative(double y, double alpha) {
  const double ay = alpha * y;
  return alpha / (std::numbers::pi * (1.0 + ay * ay));
}

void OscillatorParams::validate() const {
  if (layers.size() < 2) throw ShapeError("oscillator needs at least 2 layers");
  check_chain(layers, "oscillator");
}

void DualParams::validate() const {
  oscillator.validate();
  if (static_cast<int>(modulator.size()) != oscillator.hidden_layers()) {
    throw ShapeError("modulator must have one layer per oscillator hidden layer");
  }
  check_chain(modulator, "modulator");
  for (std::size_t i = 0; i < modulator.size(); ++i) {
    if (modulator[i].out() != oscillator.layers[i].out()) {
      throw ShapeError("modulator layer " + std::to_string(i) +
                       " width differs from the oscillator");
    }
  }
  for (const auto& z : latents) {
    if (z.size() != latent_dim()) throw ShapeError("latent code dimension mismatch");
    if (!z.allFinite()) throw NumericalError("latent code is not finite");
  }
}

OscillatorParams init_oscillator(int input_dim, int width, int depth, double omega,
                                 std::uint64_t seed, int output_dim, double alpha) {
  if (input_dim < 1 || width < 1 || depth < 2 || output_dim < 1) {
    throw InvalidSpecError("oscillator needs input_dim >= 1, width >= 1, depth >= 2");
  }
  if (!(omega > 0.0)) throw InvalidSpecError("omega must be > 0");
  std::mt19937_64 rng(seed);
  OscillatorParams p;
  p.omega = omega;
  p.alpha = alpha;
  Layer first = uniform_layer(input_dim, width, 1.0 / input_dim, 1.0 / std::sqrt(input_dim), rng);
  first.weight *= omega;
  first.bias *= omega;
  p.layers.push_back(std::move(first));
  for (int i = 1; i < depth - 1; ++i) {
    p.layers.push_back(
        uniform_layer(width, width, std::sqrt(6.0 / width), 1.0 / std::sqrt(width), rng));
  }
  p.layers.push_back(
      uniform_layer(width, output_dim, std::sqrt(6.0 / width), 1.0 / std::sqrt(width), rng));
  return p;
}

DualParams init_dual(int input_dim, int width, int depth, double omega, int latent_dim,
                     int n_latents, std::uint64_t seed, int output_dim, double alpha) {
  if (latent_dim < 1 || n_latents < 0) throw InvalidSpecError("latent_dim must be >= 1");
  DualParams p;
  p.oscillator = init_oscillator(input_dim, width, depth, omega, seed, output_dim, alpha);
  // Separate stream so the oscillator matches init_oscillator under the same seed.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  int in = latent_dim;
  for (int i = 0; i < depth - 1; ++i) {
    Layer layer = uniform_layer(in, width, std::sqrt(6.0 / in), 0.0, rng);
    layer.bias.setOnes();
    p.modulator.push_back(std::move(layer));
    in = width;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < n_latents; ++k) {
    Eigen::VectorXd z(latent_dim);
    for (int j = 0; j < latent_dim; ++j) z[j] = normal(rng);
    p.latents.push_back(std::move(z));
  }
  return p;
}

ForwardResult forward_oscillator(const OscillatorParams& params, const Eigen::MatrixXd& coords) {
  params.validate();
  check_finite(params.layers, "forward_oscillator");
  ForwardResult out;
  out.densities = run_forward(params, nullptr, coords, &out.cache);
  return out;
}

std::vector<Layer> backward_oscillator(const OscillatorParams& params,
                                       const ActivationCache& cache,
                                       const Eigen::MatrixXd& dl_drho) {
  if (cache.modulated) throw ShapeError("backward_oscillator: cache comes from a modulated pass");
  return run_backward(params, cache, dl_drho, nullptr, nullptr);
}

std::vector<Eigen::VectorXd> modulator_gains(const std::vector<Layer>& modulator,
                                             const Eigen::VectorXd& z) {
  std::vector<Eigen::VectorXd> gains;
  Eigen::VectorXd h = z;
  for (const auto& layer : modulator) {
    h = (layer.weight * h + layer.bias).cwiseMax(0.0);
    gains.push_back(h);
  }
  return gains;
}

ForwardResult forward_modulated(const DualParams& params, const Eigen::MatrixXd& coords,
                                const Eigen::VectorXd& z) {
  params.validate();
  check_finite(params.oscillator.layers, "forward_modulated");
  check_finite(params.modulator, "forward_modulated");
  if (z.size() != params.latent_dim()) {
    throw ShapeError("forward_modulated: latent has dimension " + std::to_string(z.size()) +
                     ", expected " + std::to_string(params.latent_dim()));
  }
  if (!z.allFinite()) throw NumericalError("forward_modulated: non-finite latent");
  ForwardResult out;
  auto& cache = out.cache;
  cache.modulated = true;
  cache.latent = z;
  Eigen::VectorXd h = z;
  for (const auto& layer : params.modulator) {
    Eigen::VectorXd a = layer.weight * h + layer.bias;
    h = a.cwiseMax(0.0);
    cache.mod_pre.push_back(std::move(a));
    cache.mod_out.push_back(h);
  }
  out.densities = run_forward(params.oscillator, &cache.mod_out, coords, &cache);
  return out;
}

DualGradient backward_modulated(const DualParams& params, const ActivationCache& cache,
                                const Eigen::MatrixXd& dl_drho) {
  if (!cache.modulated) throw ShapeError("backward_modulated: cache comes from a plain pass");
  DualGradient g;
  std::vector<Eigen::VectorXd> dgains;
  g.oscillator = run_backward(params.oscillator, cache, dl_drho, &cache.mod_out, &dgains);

  const int n = static_cast<int>(params.modulator.size());
  g.modulator.resize(n);
  Eigen::VectorXd upstream = dgains[n - 1];
  for (int j = n - 1; j >= 0; --j) {
    const Eigen::VectorXd da =
        (cache.mod_pre[j].array() > 0.0).select(upstream.array(), 0.0).matrix();
    const Eigen::VectorXd& input = j == 0 ? cache.latent : cache.mod_out[j - 1];
    g.modulator[j].weight = da * input.transpose();
    g.modulator[j].bias = da;
    Eigen::VectorXd down = params.modulator[j].weight.transpose() * da;
    if (j > 0) {
      upstream = down + dgains[j - 1];
    } else {
      g.latent = std::move(down);
    }
  }
  return g;
}

Eigen::MatrixXd evaluate_oscillator(const OscillatorParams& params, const Eigen::MatrixXd& coords) {
  params.validate();
  check_finite(params.layers, "evaluate_oscillator");
  Eigen::MatrixXd out(coords.rows(), params.output_dim());
  for (Eigen::Index start = 0; start < coords.rows(); start += kEvalBlock) {
    const Eigen::Index len = std::min(kEvalBlock, coords.rows() - start);
    out.middleRows(start, len) = run_forward(params, nullptr, coords.middleRows(start, len), nullptr);
  }
  return out;
}

Eigen::MatrixXd evaluate_modulated(const DualParams& params, const Eigen::MatrixXd& coords,
                                   const Eigen::VectorXd& z) {
  params.validate();
  check_finite(params.oscillator.layers, "evaluate_modulated");
  check_finite(params.modulator, "evaluate_modulated");
  if (z.size() != params.latent_dim()) throw ShapeError("evaluate_modulated: latent dimension");
  if (!z.allFinite()) throw NumericalError("evaluate_modulated: non-finite latent");
  const auto gains = modulator_gains(params.modulator, z);
  Eigen::MatrixXd out(coords.rows(), params.oscillator.output_dim());
  for (Eigen::Index start = 0; start < coords.rows(); start += kEvalBlock) {
    const Eigen::Index len = std::min(kEvalBlock, coords.rows() - start);
    out.middleRows(start, len) =
        run_forward(params.oscillator, &gains, coords.middleRows(start, len), nullptr);
  }
  return out;
}

Eigen::Index parameter_count(const std::vector<Layer>& layers) {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Eigen::Index parameter_count(const DualParams& params) {
  Eigen::Index n = parameter_count(params.oscillator.layers) + parameter_count(params.modulator);
  for (const auto& z : params.latents) n += z.size();
  return n;
}

void pack(const std::vector<Layer>& layers, Eigen::VectorXd& out, Eigen::Index offset) {
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out[offset++] = l.weight(r, c);
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out[offset++] = l.bias[r];
  }
}

void unpack(const Eigen::VectorXd& in, Eigen::Index offset, std::vector<Layer>& layers) {
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = in[offset++];
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = in[offset++];
  }
}

Eigen::VectorXd flatten(const OscillatorParams& params) { return flatten(params.layers); }

Eigen::VectorXd flatten(const std::vector<Layer>& gradient) {
  Eigen::VectorXd out(parameter_count(gradient));
  pack(gradient, out, 0);
  return out;
}

void assign(OscillatorParams& params, const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count(params.layers)) throw ShapeError("assign: length mismatch");
  unpack(flat, 0, params.layers);
}

Eigen::VectorXd flatten(const DualParams& params) {
  Eigen::VectorXd out(parameter_count(params));
  Eigen::Index offset = 0;
  pack(params.oscillator.layers, out, offset);
  offset += parameter_count(params.oscillator.layers);
  pack(params.modulator, out, offset);
  offset += parameter_count(params.modulator);
  for (const auto& z : params.latents) {
    out.segment(offset, z.size()) = z;
    offset += z.size();
  }
  return out;
}

void assign(DualParams& params, const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count(params)) throw ShapeError("assign: length mismatch");
  Eigen::Index offset = 0;
  unpack(flat, offset, params.oscillator.layers);
  offset += parameter_count(params.oscillator.layers);
  unpack(flat, offset, params.modulator);
  offset += parameter_count(params.modulator);
  for (auto& z : params.latents) {
    z = flat.segment(offset, z.size());
    offset += z.size();
  }
}

Eigen::VectorXd flatten(const DualGradient& gradient, const DualParams& params, int active_latent) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(parameter_count(params));
  Eigen::Index offset = 0;
  pack(gradient.oscillator, out, offset);
  offset += parameter_count(gradient.oscillator);
  pack(gradient.modulator, out, offset);
  offset += parameter_count(gradient.modulator);
  for (int k = 0; k < static_cast<int>(params.latents.size()); ++k) {
    const Eigen::Index d = params.latents[k].size();
    if (k == active_latent) out.segment(offset, d) = gradient.latent;
    offset += d;
  }
  return out;
}

}  // namespace nsto::neural
