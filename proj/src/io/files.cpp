#include "nsto/io/files.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "nsto/error.hpp"

namespace nsto::io {

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw FormatError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw FormatError("cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string history_csv(std::span<const optimize::HistoryRecord> records) {
  std::string out(kHistoryHeader);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.epoch) + ',' + std::to_string(r.subtask) + ',' + format_real(r.loss) +
           ',' + format_real(r.compliance) + ',' + format_real(r.volume) + ',' +
           format_real(r.lambda) + ',' + format_real(r.sigma) + ',' +
           std::to_string(r.solver_iterations) + '\n';
  }
  return out;
}

}  // namespace nsto::io
