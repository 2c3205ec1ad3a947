#include "nsto/io/archive.hpp"

#include "binary.hpp"
#include "nsto/error.hpp"
#include "nsto/io/files.hpp"

namespace nsto::io {

namespace {

constexpr std::string_view kMagic = "NSTW";
constexpr std::uint32_t kMaxLayerSize = 1u << 16;

void write_layers(detail::Writer& w, const std::vector<neural::Layer>& layers) {
  w.u32(static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    w.u32(static_cast<std::uint32_t>(l.out()));
    w.u32(static_cast<std::uint32_t>(l.in()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f64(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f64(l.bias[r]);
  }
}

std::vector<neural::Layer> read_layers(detail::Reader& r) {
  const std::uint32_t n = r.u32();
  if (n > 64) r.fail("implausible layer count");
  std::vector<neural::Layer> layers;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t out = r.u32();
    const std::uint32_t in = r.u32();
    if (out == 0 || in == 0 || out > kMaxLayerSize || in > kMaxLayerSize) r.fail("bad layer shape");
    if (r.remaining() < (static_cast<std::size_t>(out) * in + out) * sizeof(double)) {
      r.fail("truncated layer data");
    }
    neural::Layer l{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (std::uint32_t row = 0; row < out; ++row) {
      for (std::uint32_t c = 0; c < in; ++c) l.weight(row, c) = r.f64();
    }
    for (std::uint32_t row = 0; row < out; ++row) l.bias[row] = r.f64();
    layers.push_back(std::move(l));
  }
  return layers;
}

}  // namespace

std::string encode_archive(const optimize::NetworkModel& model) {
  const bool dual = model.kind == optimize::ModelKind::dual;
  const auto& osc = dual ? model.dual.oscillator : model.oscillator;
  osc.validate();
  if (dual) model.dual.validate();
  const std::size_t n_sub = model.volume_fractions.size();
  if (model.labels.size() != n_sub) throw ShapeError("archive: labels and volume fractions differ in length");
  if (dual && model.dual.latents.size() != n_sub) {
    throw ShapeError("archive: one latent per subtask is required");
  }

  detail::Writer w;
  w.bytes(kMagic);
  w.u32(kArchiveVersion);
  w.u8(dual ? 1 : 0);
  const auto& g = model.grid;
  w.u8(static_cast<std::uint8_t>(g.dim()));
  for (int d : g.dims()) w.u64(static_cast<std::uint64_t>(d));
  for (double h : g.element_size()) w.f64(h);
  w.f64(osc.omega);
  w.f64(osc.alpha);
  write_layers(w, osc.layers);
  if (dual) write_layers(w, model.dual.modulator);
  w.u32(static_cast<std::uint32_t>(n_sub));
  w.u32(dual ? static_cast<std::uint32_t>(model.dual.latent_dim()) : 0);
  for (std::size_t s = 0; s < n_sub; ++s) {
    w.f64(model.volume_fractions[s]);
    w.u32(static_cast<std::uint32_t>(model.labels[s].size()));
    w.bytes(model.labels[s]);
    if (dual) {
      for (Eigen::Index k = 0; k < model.dual.latents[s].size(); ++k) w.f64(model.dual.latents[s][k]);
    }
  }
  return std::move(w.str());
}

WeightArchive decode_archive(std::string_view bytes) {
  detail::Reader r(bytes, "weight archive");
  if (r.bytes(4) != kMagic) r.fail("bad magic");
  WeightArchive a;
  a.version = r.u32();
  if (a.version != kArchiveVersion) {
    r.fail("unsupported version " + std::to_string(a.version) + " (expected " +
           std::to_string(kArchiveVersion) + ")");
  }
  const std::uint8_t kind = r.u8();
  if (kind > 1) r.fail("unknown model kind");
  const bool dual = kind == 1;
  const int rank = r.u8();
  if (rank != 2 && rank != 3) r.fail("grid rank must be 2 or 3");
  std::vector<int> dims(rank);
  std::vector<double> size(rank);
  for (auto& d : dims) {
    const std::uint64_t v = r.u64();
    if (v < 1 || v > (1u << 20)) r.fail("grid dimension out of range");
    d = static_cast<int>(v);
  }
  for (auto& h : size) h = r.f64();

  optimize::NetworkModel m;
  try {
    m.grid = mesh::Grid(dims, size);
  } catch (const Error& e) {
    r.fail(std::string("invalid grid: ") + e.what());
  }
  m.kind = dual ? optimize::ModelKind::dual : optimize::ModelKind::single;
  neural::OscillatorParams osc;
  osc.omega = r.f64();
  osc.alpha = r.f64();
  osc.layers = read_layers(r);
  try {
    osc.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  if (osc.input_dim() != rank) r.fail("network input dimension differs from the grid rank");
  if (dual) {
    m.dual.oscillator = std::move(osc);
    m.dual.modulator = read_layers(r);
  } else {
    m.oscillator = std::move(osc);
  }
  const std::uint32_t n_sub = r.u32();
  const std::uint32_t latent_dim = r.u32();
  if (n_sub > 4096) r.fail("implausible subtask count");
  if (dual != (latent_dim > 0)) r.fail("latent dimension inconsistent with the model kind");
  for (std::uint32_t s = 0; s < n_sub; ++s) {
    m.volume_fractions.push_back(r.f64());
    const std::uint32_t len = r.u32();
    m.labels.emplace_back(r.bytes(len));
    if (dual) {
      Eigen::VectorXd z(latent_dim);
      for (std::uint32_t k = 0; k < latent_dim; ++k) z[k] = r.f64();
      m.dual.latents.push_back(std::move(z));
    }
  }
  r.expect_end();
  if (dual) {
    try {
      m.dual.validate();
    } catch (const Error& e) {
      r.fail(e.what());
    }
  }
  a.model = std::move(m);
  return a;
}

void save_weights(const optimize::NetworkModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_archive(model));
}

WeightArchive load_weights(const std::filesystem::path& path) { return decode_archive(read_file(path)); }

}  // namespace nsto::io
