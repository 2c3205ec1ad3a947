#include "nsto/io/bench.hpp"

#include <chrono>

#include "nsto/error.hpp"
#include "nsto/io/files.hpp"
#include "nsto/mesh/benchmarks.hpp"

namespace nsto::io {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

optimize::Problem benchmark_problem(const std::string& name, double volume_fraction) {
  std::vector<int> dims;
  if (name == "mbb" || name == "bridge") {
    dims = {120, 40};
  } else if (name == "lbracket") {
    dims = {100, 100};
  } else {
    throw UsageError("unknown benchmark '" + name + "' (expected mbb, bridge, lbracket or all)");
  }
  optimize::Problem p;
  p.grid = mesh::build_grid(dims);
  p.subtasks = {optimize::Subtask{volume_fraction, mesh::preset_boundary(name, p.grid), name}};
  return p;
}

std::vector<BenchRow> run_bench(const std::string& suite, const BenchOptions& options) {
  std::vector<std::string> names;
  if (suite == "all") {
    names = {"mbb", "bridge", "lbracket"};
  } else {
    names = {suite};
  }
  std::vector<BenchRow> rows;
  for (const auto& name : names) {
    for (double delta : options.deltas) {
      const optimize::Problem problem = benchmark_problem(name, delta);
      auto t0 = std::chrono::steady_clock::now();
      const optimize::TrainedModel m = optimize::train_single(problem, options.network, options.train);
      const auto& last = m.state.history.back();
      rows.push_back({"nsto", name, options.network.omega, delta, last.compliance, last.volume,
                      m.state.epochs, seconds_since(t0)});
      t0 = std::chrono::steady_clock::now();
      const simp::SimpResult s = simp::simp_optimize(problem, options.simp);
      const auto& sl = s.history.back();
      rows.push_back({"simp", name, 0.0, delta, sl.compliance, sl.volume,
                      static_cast<int>(s.history.size()), seconds_since(t0)});
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "benchmark,method,omega,delta,compliance,volume,iterations,seconds\n";
  for (const auto& r : rows) {
    out += r.benchmark + ',' + r.method + ',' + format_real(r.omega) + ',' + format_real(r.delta) +
           ',' + format_real(r.compliance) + ',' + format_real(r.volume) + ',' +
           std::to_string(r.iterations) + ',' + format_real(r.seconds) + '\n';
  }
  return out;
}

}  // namespace nsto::io
