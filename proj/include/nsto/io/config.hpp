#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "nsto/optimize/problem.hpp"
#include "nsto/simp/simp.hpp"

namespace nsto::io {

enum class RunMode { single, multi };

/// A complete run description: problem, network, training, solver and SIMP settings.
struct ProblemSpec {
  RunMode mode = RunMode::single;
  optimize::Problem problem;
  optimize::NetworkConfig network;
  optimize::TrainConfig train;
  simp::SimpConfig simp;

  bool operator==(const ProblemSpec&) const = default;
};

/// Parses a JSON problem document (grammar in docs/formats.md). Unknown keys
/// are rejected and every problem found is reported at once through
/// ValidationError.
ProblemSpec parse_problem(std::string_view text);

/// Canonical JSON with every field explicit and boundaries expanded;
/// parse_problem(print_problem(s)) == s.
std::string print_problem(const ProblemSpec& spec);

ProblemSpec load_problem(const std::filesystem::path& path);

}  // namespace nsto::io
