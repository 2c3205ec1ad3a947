#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsto/optimize/training.hpp"

namespace nsto::io {

/// Writes to a temporary sibling and renames it over `path`, so readers never
/// see a partial file. Throws FormatError on I/O failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Whole-file read. Throws FormatError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

inline constexpr std::string_view kHistoryHeader =
    "epoch,subtask,loss,compliance,volume,lambda,sigma,solver_iters";

/// History rows as CSV with a header line; reals use 17 significant digits.
std::string history_csv(std::span<const optimize::HistoryRecord> records);

/// Accumulates records from a training sink and writes them in one go.
class HistoryBuffer {
 public:
  optimize::HistorySink sink() {
    return [this](const optimize::HistoryRecord& r) { records_.push_back(r); };
  }
  const std::vector<optimize::HistoryRecord>& records() const noexcept { return records_; }
  void write(const std::filesystem::path& path) const { write_file_atomic(path, history_csv(records_)); }

 private:
  std::vector<optimize::HistoryRecord> records_;
};

/// Shortest-exact decimal with up to 17 significant digits (printf "%.17g").
std::string format_real(double value);

}  // namespace nsto::io
