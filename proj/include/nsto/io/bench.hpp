#pragma once

#include <string>
#include <vector>

#include "nsto/optimize/problem.hpp"
#include "nsto/optimize/training.hpp"
#include "nsto/simp/simp.hpp"

namespace nsto::io {

/// Standard benchmark domains: mbb and bridge on 120x40, lbracket on 100x100.
optimize::Problem benchmark_problem(const std::string& name, double volume_fraction);

struct BenchRow {
  std::string method;  // "nsto" or "simp"
  std::string benchmark;
  double omega = 0.0;  // 0 for simp
  double delta = 0.0;
  double compliance = 0.0;
  double volume = 0.0;
  int iterations = 0;
  double seconds = 0.0;
};

struct BenchOptions {
  std::vector<double> deltas{0.3, 0.4, 0.5};
  optimize::NetworkConfig network;
  optimize::TrainConfig train;
  simp::SimpConfig simp;
};

/// Runs NSTO and SIMP for every delta on one benchmark ("all" runs the three).
std::vector<BenchRow> run_bench(const std::string& suite, const BenchOptions& options);

/// CSV with columns benchmark,method,omega,delta,compliance,volume,iterations,seconds.
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace nsto::io
