#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "nsto/optimize/training.hpp"

namespace nsto::io {

inline constexpr std::uint32_t kArchiveVersion = 1;

/// Self-describing serialized network: topology, weights, latent table with
/// per-subtask metadata and the grid it was trained on.
struct WeightArchive {
  std::uint32_t version = kArchiveVersion;
  optimize::NetworkModel model;
};

std::string encode_archive(const optimize::NetworkModel& model);
/// Throws FormatError on a bad magic, version, truncation or inconsistent
/// lengths; nothing is returned on error.
WeightArchive decode_archive(std::string_view bytes);

void save_weights(const optimize::NetworkModel& model, const std::filesystem::path& path);
WeightArchive load_weights(const std::filesystem::path& path);

}  // namespace nsto::io
