#include "nsto/io/export.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <unordered_map>

#include <Eigen/Geometry>

#include "binary.hpp"
#include "marching_cubes_tables.hpp"
#include "nsto/error.hpp"
#include "nsto/io/files.hpp"

namespace nsto::io {

namespace {

constexpr std::uint32_t kRaw64Version = 1;

void check_field(const DensityField& field) {
  if (field.dims.size() != 2 && field.dims.size() != 3) {
    throw ShapeError("density field must be 2D or 3D");
  }
  Eigen::Index n = 1;
  for (int d : field.dims) {
    if (d < 1) throw ShapeError("density field dimensions must be >= 1");
    n *= d;
  }
  if (n != field.values.size()) {
    throw ShapeError("density field has " + std::to_string(field.values.size()) +
                     " values, dimensions imply " + std::to_string(n));
  }
}

// Sample lookup on the void-padded lattice; indices may run one past either end.
class PaddedField {
 public:
  explicit PaddedField(const DensityField& f) : f_(f) {
    for (std::size_t a = 0; a < 3; ++a) n_[a] = a < f.dims.size() ? f.dims[a] : 1;
  }
  double operator()(int i, int j, int k = 0) const {
    if (i < 0 || j < 0 || k < 0 || i >= n_[0] || j >= n_[1] || k >= n_[2]) return 0.0;
    return f_.values[(static_cast<Eigen::Index>(k) * n_[1] + j) * n_[0] + i];
  }
  int n(int axis) const { return n_[axis]; }

 private:
  const DensityField& f_;
  std::array<int, 3> n_{};
};

bool one_sided(const DensityField& field, double threshold) {
  const bool first = field.values[0] >= threshold;
  for (Eigen::Index i = 1; i < field.values.size(); ++i) {
    if ((field.values[i] >= threshold) != first) return false;
  }
  return true;
}

// Crossing along a lattice edge, always interpolated from the lower endpoint
// so neighbouring cells produce identical coordinates.
double crossing(double a, double b, double threshold) {
  const double denom = b - a;
  if (denom == 0.0) return 0.5;
  return std::clamp((threshold - a) / denom, 0.0, 1.0);
}

}  // namespace

DensityFormat parse_density_format(const std::string& name) {
  if (name == "pgm8" || name == "pgm") return DensityFormat::pgm8;
  if (name == "raw64") return DensityFormat::raw64;
  if (name == "csv") return DensityFormat::csv;
  throw UsageError("unknown density format '" + name + "' (expected pgm8, raw64 or csv)");
}

std::string encode_pgm8(const DensityField& field, const ExportOptions& options) {
  check_field(field);
  const int w = field.dims[0];
  const int h = field.dims[1];
  Eigen::Index offset = 0;
  if (field.dims.size() == 3) {
    if (options.slice < 0) {
      throw FormatError("pgm8 cannot store a 3D field; choose a z slice");
    }
    if (options.slice >= field.dims[2]) throw UsageError("slice index beyond the field depth");
    offset = static_cast<Eigen::Index>(options.slice) * w * h;
  }
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(w) * h);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      const double rho = std::clamp(field.values[offset + static_cast<Eigen::Index>(y) * w + x], 0.0, 1.0);
      out.push_back(static_cast<char>(255 - static_cast<int>(std::lround(255.0 * rho))));
    }
  }
  return out;
}

std::string encode_raw64(const DensityField& field) {
  check_field(field);
  detail::Writer w;
  w.bytes("NSTO");
  w.u32(kRaw64Version);
  w.u8(static_cast<std::uint8_t>(field.dims.size()));
  for (int d : field.dims) w.u64(static_cast<std::uint64_t>(d));
  w.u32(static_cast<std::uint32_t>(field.scale));
  for (Eigen::Index i = 0; i < field.values.size(); ++i) w.f64(field.values[i]);
  return std::move(w.str());
}

std::string encode_csv(const DensityField& field) {
  check_field(field);
  const bool three = field.dims.size() == 3;
  std::string out = three ? "x,y,z,density\n" : "x,y,density\n";
  const int nx = field.dims[0];
  const int ny = field.dims[1];
  for (Eigen::Index idx = 0; idx < field.values.size(); ++idx) {
    const Eigen::Index x = idx % nx;
    const Eigen::Index y = (idx / nx) % ny;
    out += std::to_string(x) + ',' + std::to_string(y) + ',';
    if (three) out += std::to_string(idx / (static_cast<Eigen::Index>(nx) * ny)) + ',';
    out += format_real(field.values[idx]) + '\n';
  }
  return out;
}

DensityField decode_raw64(std::string_view bytes) {
  detail::Reader r(bytes, "raw64");
  if (r.bytes(4) != "NSTO") r.fail("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kRaw64Version) r.fail("unsupported version " + std::to_string(version));
  const int rank = r.u8();
  if (rank != 2 && rank != 3) r.fail("rank must be 2 or 3");
  DensityField f;
  std::uint64_t n = 1;
  for (int a = 0; a < rank; ++a) {
    const std::uint64_t d = r.u64();
    if (d < 1 || d > (1u << 30)) r.fail("dimension out of range");
    f.dims.push_back(static_cast<int>(d));
    n *= d;
  }
  f.scale = static_cast<int>(r.u32());
  if (f.scale < 1) r.fail("scale must be >= 1");
  if (r.remaining() != n * sizeof(double)) r.fail("payload length does not match dimensions");
  f.values.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values[i] = r.f64();
  r.expect_end();
  return f;
}

Pgm decode_pgm8(std::string_view bytes) {
  // Header tokens: magic, width, height, maxval, then a single whitespace byte.
  std::size_t pos = 0;
  const auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError("pgm: truncated header");
    return std::string(bytes.substr(start, pos - start));
  };
  if (token() != "P5") throw FormatError("pgm: not a binary P5 file");
  Pgm p;
  try {
    p.width = std::stoi(token());
    p.height = std::stoi(token());
    if (std::stoi(token()) != 255) throw FormatError("pgm: maxval must be 255");
  } catch (const std::logic_error&) {
    throw FormatError("pgm: malformed header");
  }
  ++pos;
  const std::size_t n = static_cast<std::size_t>(p.width) * p.height;
  if (p.width < 1 || p.height < 1 || bytes.size() - std::min(pos, bytes.size()) != n) {
    throw FormatError("pgm: pixel data length does not match the header");
  }
  p.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return p;
}

void export_density(const DensityField& field, DensityFormat format,
                    const std::filesystem::path& path, const ExportOptions& options) {
  switch (format) {
    case DensityFormat::pgm8:
      write_file_atomic(path, encode_pgm8(field, options));
      break;
    case DensityFormat::raw64:
      write_file_atomic(path, encode_raw64(field));
      break;
    case DensityFormat::csv:
      write_file_atomic(path, encode_csv(field));
      break;
  }
}

DensityField read_raw64(const std::filesystem::path& path) { return decode_raw64(read_file(path)); }

std::vector<Polyline> marching_squares(const DensityField& field, double threshold) {
  check_field(field);
  if (field.dims.size() != 2) throw ShapeError("marching squares needs a 2D field");
  const PaddedField f(field);
  const int nx = f.n(0);
  const int ny = f.n(1);
  const int stride = nx + 2;
  // Lattice edge ids: horizontal (i,j)-(i+1,j) -> 2*key, vertical (i,j)-(i,j+1) -> 2*key+1.
  const auto key = [&](int i, int j) { return (static_cast<long long>(j + 1) * stride + (i + 1)) * 2; };
  const auto inside = [&](int i, int j) { return f(i, j) >= threshold; };

  std::unordered_map<long long, Eigen::Vector2d> points;
  const auto point = [&](long long id) -> long long {
    if (points.count(id)) return id;
    const long long cell = id / 2;
    const int i = static_cast<int>(cell % stride) - 1;
    const int j = static_cast<int>(cell / stride) - 1;
    Eigen::Vector2d p(i + 0.5, j + 0.5);
    if (id % 2 == 0) {
      p.x() += crossing(f(i, j), f(i + 1, j), threshold);
    } else {
      p.y() += crossing(f(i, j), f(i, j + 1), threshold);
    }
    points.emplace(id, p);
    return id;
  };

  std::vector<std::array<long long, 2>> segments;
  for (int j = -1; j < ny; ++j) {
    for (int i = -1; i < nx; ++i) {
      const int c = (inside(i, j) ? 1 : 0) | (inside(i + 1, j) ? 2 : 0) |
                    (inside(i + 1, j + 1) ? 4 : 0) | (inside(i, j + 1) ? 8 : 0);
      if (c == 0 || c == 15) continue;
      const long long e[4] = {key(i, j), key(i + 1, j) + 1, key(i, j + 1), key(i, j) + 1};
      const auto add = [&](int a, int b) { segments.push_back({point(e[a]), point(e[b])}); };
      const bool center =
          0.25 * (f(i, j) + f(i + 1, j) + f(i + 1, j + 1) + f(i, j + 1)) >= threshold;
      switch (c) {
        case 1: add(3, 0); break;
        case 2: add(0, 1); break;
        case 3: add(3, 1); break;
        case 4: add(1, 2); break;
        case 5:
          if (center) { add(0, 1); add(2, 3); } else { add(3, 0); add(1, 2); }
          break;
        case 6: add(0, 2); break;
        case 7: add(3, 2); break;
        case 8: add(2, 3); break;
        case 9: add(0, 2); break;
        case 10:
          if (center) { add(3, 0); add(1, 2); } else { add(0, 1); add(2, 3); }
          break;
        case 11: add(1, 2); break;
        case 12: add(1, 3); break;
        case 13: add(0, 1); break;
        case 14: add(3, 0); break;
        default: break;
      }
    }
  }

  // Every crossing is shared by exactly two segments; walk the cycles.
  std::unordered_map<long long, std::array<int, 2>> incident;
  for (int s = 0; s < static_cast<int>(segments.size()); ++s) {
    for (long long id : segments[s]) {
      auto [it, fresh] = incident.try_emplace(id, std::array<int, 2>{s, -1});
      if (!fresh) it->second[1] = s;
    }
  }
  std::vector<char> used(segments.size(), 0);
  std::vector<Polyline> lines;
  for (int start = 0; start < static_cast<int>(segments.size()); ++start) {
    if (used[start]) continue;
    Polyline line;
    int s = start;
    long long at = segments[s][0];
    while (s >= 0 && !used[s]) {
      used[s] = 1;
      line.points.push_back(points.at(at));
      at = segments[s][0] == at ? segments[s][1] : segments[s][0];
      const auto& inc = incident.at(at);
      s = inc[0] == s ? inc[1] : inc[0];
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<Triangle> marching_cubes(const DensityField& field, double threshold) {
  check_field(field);
  if (field.dims.size() != 3) throw ShapeError("marching cubes needs a 3D field");
  const PaddedField f(field);
  static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                        {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  static constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                       {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  std::vector<Triangle> tris;
  for (int k = -1; k < f.n(2); ++k) {
    for (int j = -1; j < f.n(1); ++j) {
      for (int i = -1; i < f.n(0); ++i) {
        double val[8];
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          val[c] = f(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
          if (val[c] < threshold) cube |= 1 << c;
        }
        if (detail::kEdgeTable[cube] == 0) continue;
        std::array<Eigen::Vector3d, 12> vert;
        for (int e = 0; e < 12; ++e) {
          if (!(detail::kEdgeTable[cube] & (1 << e))) continue;
          int a = kEdge[e][0];
          int b = kEdge[e][1];
          // Interpolate from the lexicographically lower corner for bitwise-shared vertices.
          const auto lower = [&](int c) {
            return kCorner[c][2] * 4 + kCorner[c][1] * 2 + kCorner[c][0];
          };
          if (lower(a) > lower(b)) std::swap(a, b);
          const double t = crossing(val[a], val[b], threshold);
          for (int ax = 0; ax < 3; ++ax) {
            const double pa = (ax == 0 ? i : ax == 1 ? j : k) + kCorner[a][ax] + 0.5;
            const double pb = (ax == 0 ? i : ax == 1 ? j : k) + kCorner[b][ax] + 0.5;
            vert[e][ax] = pa + t * (pb - pa);
          }
        }
        for (int t = 0; detail::kTriTable[cube][t] != -1; t += 3) {
          tris.push_back(Triangle{{vert[detail::kTriTable[cube][t]], vert[detail::kTriTable[cube][t + 1]],
                                   vert[detail::kTriTable[cube][t + 2]]}});
        }
      }
    }
  }
  return tris;
}

std::string encode_polylines(const std::vector<Polyline>& lines) {
  std::string out = "# nsto contour v1\npolylines " + std::to_string(lines.size()) + "\n";
  for (const auto& line : lines) {
    out += "polyline " + std::to_string(line.points.size()) + " closed\n";
    for (const auto& p : line.points) out += format_real(p.x()) + ' ' + format_real(p.y()) + '\n';
  }
  return out;
}

std::string encode_stl(const std::vector<Triangle>& triangles) {
  detail::Writer w;
  std::string header = "nsto marching cubes";
  header.resize(80, '\0');
  w.bytes(header);
  w.u32(static_cast<std::uint32_t>(triangles.size()));
  for (const auto& t : triangles) {
    Eigen::Vector3d n = (t.v[1] - t.v[0]).cross(t.v[2] - t.v[0]);
    const double len = n.norm();
    if (len > 0.0) n /= len;
    for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(n[a]));
    for (const auto& v : t.v) {
      for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(v[a]));
    }
    w.u16(0);
  }
  return std::move(w.str());
}

ContourResult export_contour(const DensityField& field, double threshold,
                             const std::filesystem::path& path) {
  check_field(field);
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("contour threshold must lie in (0, 1)");
  ContourResult res;
  res.empty_warning = one_sided(field, threshold);
  if (field.dims.size() == 2) {
    std::vector<Polyline> lines;
    if (!res.empty_warning) lines = marching_squares(field, threshold);
    res.primitives = lines.size();
    write_file_atomic(path, encode_polylines(lines));
  } else {
    std::vector<Triangle> tris;
    if (!res.empty_warning) tris = marching_cubes(field, threshold);
    res.primitives = tris.size();
    write_file_atomic(path, encode_stl(tris));
  }
  return res;
}

}  // namespace nsto::io
