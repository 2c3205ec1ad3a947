#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nsto::io {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;    // validation, usage or file-format error
inline constexpr int kExitNumerical = 2;  // solver failure, non-finite values

/// Entry point of the `nsto` tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nsto::io
