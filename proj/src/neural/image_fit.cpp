#include "nsto/neural/image_fit.hpp"

#include <cmath>
#include <limits>

#include "nsto/error.hpp"
#include "nsto/mesh/grid.hpp"

namespace nsto::neural {

Raster checkerboard(int height, int width, int cell) {
  if (height < 1 || width < 1 || cell < 1) throw InvalidSpecError("checkerboard: sizes must be >= 1");
  Raster r{height, width, Eigen::MatrixXd(static_cast<Eigen::Index>(height) * width, 1)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      r.pixels(static_cast<Eigen::Index>(y) * width + x, 0) = ((y / cell + x / cell) % 2 == 0) ? 1.0 : 0.0;
    }
  }
  return r;
}

double psnr(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
    throw ShapeError("psnr: prediction and target shapes differ");
  }
  const double mse = (prediction - target).squaredNorm() / static_cast<double>(target.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

std::vector<double> fit_image(OscillatorParams& params, const Raster& target, int epochs,
                              const OptimizerConfig& optimizer) {
  if (epochs < 0) throw InvalidSpecError("fit_image: epochs must be >= 0");
  if (target.pixels.rows() != static_cast<Eigen::Index>(target.height) * target.width) {
    throw ShapeError("fit_image: raster pixel count does not match its dimensions");
  }
  if (params.output_dim() != target.channels()) {
    throw ShapeError("fit_image: network output dimension differs from the channel count");
  }
  if (params.input_dim() != 2) throw ShapeError("fit_image: network must take 2D coordinates");
  const Eigen::MatrixXd coords = mesh::raster_coordinates(target.height, target.width);
  const double scale = 2.0 / static_cast<double>(target.pixels.size());

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(epochs) + 1);
  Eigen::VectorXd flat = flatten(params);
  OptimizerState state = make_optimizer(optimizer, flat.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    ForwardResult fwd = forward_oscillator(params, coords);
    history.push_back(psnr(fwd.densities, target.pixels));
    const Eigen::MatrixXd dl = scale * (fwd.densities - target.pixels);
    const Eigen::VectorXd grad = flatten(backward_oscillator(params, fwd.cache, dl));
    optimizer_step(flat, grad, state);
    assign(params, flat);
  }
  history.push_back(psnr(evaluate_oscillator(params, coords), target.pixels));
  return history;
}

}  // namespace nsto::neural
