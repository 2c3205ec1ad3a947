#pragma once

#include <vector>

#include <Eigen/Core>

#include "nsto/neural/network.hpp"
#include "nsto/neural/optimizer.hpp"

namespace nsto::neural {

/// Row-major raster with one row per pixel (x fastest) and one column per channel.
struct Raster {
  int height = 0;
  int width = 0;
  Eigen::MatrixXd pixels;  // (height * width) x channels, values in [0, 1]

  int channels() const { return static_cast<int>(pixels.cols()); }
};

/// Grayscale checkerboard with square cells of `cell` pixels; the top-left cell is 1.
Raster checkerboard(int height, int width, int cell);

/// Peak signal-to-noise ratio in dB for signals in [0, 1]. Infinite for an exact fit.
double psnr(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target);

/// Fits the oscillator to the raster under mean-squared error, full batch.
/// The network output dimension must equal the channel count. Returns the PSNR
/// of the prediction at the start of every epoch, then one final entry after
/// the last update (so epochs + 1 values; a single value for zero epochs).
std::vector<double> fit_image(OscillatorParams& params, const Raster& target, int epochs,
                              const OptimizerConfig& optimizer = {});

}  // namespace nsto::neural
