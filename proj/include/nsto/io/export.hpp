#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "nsto/field.hpp"

namespace nsto::io {

enum class DensityFormat { pgm8, raw64, csv };

DensityFormat parse_density_format(const std::string& name);

struct ExportOptions {
  /// For 3D fields written as pgm8: index of the z slice to export. Negative
  /// means no slice, which makes pgm8 on a 3D field an error.
  int slice = -1;
};

// In-memory encoders. Every encoder is deterministic byte-for-byte.

/// Binary PGM (P5), pixel = 255 - round(255 * clamp(rho, 0, 1)), first row = top (max y).
std::string encode_pgm8(const DensityField& field, const ExportOptions& options = {});
/// "NSTO", u32 version, u8 rank, u64 dims[rank], u32 scale, f64 values; little-endian.
std::string encode_raw64(const DensityField& field);
/// Header "x,y[,z],density" then one row per value, x fastest.
std::string encode_csv(const DensityField& field);

DensityField decode_raw64(std::string_view bytes);
/// Returns an 8-bit grayscale image (row 0 = top) as stored.
struct Pgm {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;
};
Pgm decode_pgm8(std::string_view bytes);

void export_density(const DensityField& field, DensityFormat format,
                    const std::filesystem::path& path, const ExportOptions& options = {});
DensityField read_raw64(const std::filesystem::path& path);

/// Closed polylines from marching squares, in field-cell units (sample i sits
/// at x = i + 0.5). The field is padded with void so contours close along the
/// domain boundary. Saddle cells are resolved by the mean of their corners.
struct Polyline {
  std::vector<Eigen::Vector2d> points;  // closed: last point connects to the first
};
std::vector<Polyline> marching_squares(const DensityField& field, double threshold);

/// Triangles from marching cubes on the void-padded field, outward facing.
struct Triangle {
  std::array<Eigen::Vector3d, 3> v;
};
std::vector<Triangle> marching_cubes(const DensityField& field, double threshold);

std::string encode_polylines(const std::vector<Polyline>& lines);
std::string encode_stl(const std::vector<Triangle>& triangles);

struct ContourResult {
  std::size_t primitives = 0;  // polylines (2D) or triangles (3D)
  bool empty_warning = false;  // field entirely on one side of the threshold
};

/// 2D: polyline text; 3D: binary STL. A field entirely on one side of the
/// threshold yields a valid empty file and sets empty_warning.
ContourResult export_contour(const DensityField& field, double threshold,
                             const std::filesystem::path& path);

}  // namespace nsto::io
