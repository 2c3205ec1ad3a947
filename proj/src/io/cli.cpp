#include "nsto/io/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "nsto/error.hpp"
#include "nsto/io/archive.hpp"
#include "nsto/io/bench.hpp"
#include "nsto/io/config.hpp"
#include "nsto/io/export.hpp"
#include "nsto/io/files.hpp"

namespace nsto::io {

namespace fs = std::filesystem;

namespace {

void apply_thread_limit(std::ostream& err) {
  const char* env = std::getenv("NSTO_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    err << "warning: ignoring NSTO_THREADS='" << env << "' (expected a positive integer)\n";
    return;
  }
  Eigen::setNbThreads(static_cast<int>(n));
}

void write_field(const DensityField& field, const fs::path& dir, const std::string& stem) {
  export_density(field, DensityFormat::raw64, dir / (stem + ".raw64"));
  if (field.dims.size() == 2) export_density(field, DensityFormat::pgm8, dir / (stem + ".pgm"));
}

void summarize(std::ostream& out, const optimize::TrainState& state) {
  out << "epochs: " << state.epochs << "\n";
  if (state.converged) {
    out << "converged at epoch " << state.converged_epoch << "\n";
  } else {
    out << "convergence criteria not met\n";
  }
}

int cmd_train(const fs::path& config, const fs::path& dir, bool multi, std::ostream& out) {
  const ProblemSpec spec = load_problem(config);
  if (multi != (spec.mode == RunMode::multi)) {
    throw UsageError(multi ? "config describes a single-structure run; use `nsto optimize`"
                           : "config describes a multi-subtask run; use `nsto multi`");
  }
  fs::create_directories(dir);
  HistoryBuffer history;
  const optimize::TrainedModel model =
      multi ? optimize::train_multi(spec.problem, spec.network, spec.train, history.sink())
            : optimize::train_single(spec.problem, spec.network, spec.train, history.sink());
  history.write(dir / "history.csv");
  save_weights(model.model, dir / "model.nsto");
  for (std::size_t i = 0; i < model.final_densities.size(); ++i) {
    write_field(model.final_densities[i], dir, multi ? "density_" + std::to_string(i) : "density");
  }
  summarize(out, model.state);
  const std::size_t n_sub = spec.problem.subtasks.size();
  for (std::size_t i = 0; i < n_sub; ++i) {
    const auto& r = model.state.history[model.state.history.size() - n_sub + i];
    out << "subtask " << i << ": compliance " << format_real(r.compliance) << ", volume "
        << format_real(r.volume) << " (target " << format_real(spec.problem.subtasks[i].volume_fraction)
        << ")\n";
  }
  return kExitOk;
}

int cmd_simp(const fs::path& config, const fs::path& dir, std::ostream& out) {
  const ProblemSpec spec = load_problem(config);
  if (spec.mode != RunMode::single) throw UsageError("simp runs a single-structure config");
  fs::create_directories(dir);
  HistoryBuffer history;
  const simp::SimpResult result = simp::simp_optimize(spec.problem, spec.simp, history.sink());
  history.write(dir / "simp_history.csv");
  write_field(result.field, dir, "simp_density");
  if (!result.history.empty()) {
    const auto& r = result.history.back();
    out << "iterations: " << result.history.size() << "\ncompliance " << format_real(r.compliance)
        << ", volume " << format_real(r.volume) << "\n";
  }
  return kExitOk;
}

int cmd_infer(const fs::path& weights, int scale, const std::vector<double>& latent,
              std::optional<int> subtask, const fs::path& output, std::ostream& out) {
  const WeightArchive archive = load_weights(weights);
  const auto& m = archive.model;
  std::optional<Eigen::VectorXd> z;
  if (m.kind == optimize::ModelKind::dual) {
    if (!latent.empty() && subtask) throw UsageError("give either --latent or --subtask, not both");
    if (subtask) {
      if (*subtask < 0 || *subtask >= static_cast<int>(m.dual.latents.size())) {
        throw UsageError("--subtask out of range (archive has " +
                         std::to_string(m.dual.latents.size()) + " latents)");
      }
      z = m.dual.latents[*subtask];
    } else if (!latent.empty()) {
      if (static_cast<int>(latent.size()) != m.dual.latent_dim()) {
        throw UsageError("--latent needs " + std::to_string(m.dual.latent_dim()) + " value(s)");
      }
      z = Eigen::Map<const Eigen::VectorXd>(latent.data(), static_cast<Eigen::Index>(latent.size()));
    } else {
      throw UsageError("dual-network archive needs a latent code: pass --latent Z or --subtask I");
    }
  } else if (!latent.empty() || subtask) {
    throw UsageError("single-network archive takes no latent code");
  }
  const DensityField field = optimize::infer(m, scale, z);
  export_density(field, DensityFormat::raw64, output);
  out << "wrote " << output.string() << " (";
  for (std::size_t a = 0; a < field.dims.size(); ++a) out << (a ? "x" : "") << field.dims[a];
  out << ", volume " << format_real(optimize::volume_fraction(field)) << ")\n";
  return kExitOk;
}

int cmd_export(const fs::path& input, const std::string& format, fs::path output, double threshold,
               int slice, std::ostream& out, std::ostream& err) {
  const DensityField field = read_raw64(input);
  if (format == "contour") {
    if (output.empty()) {
      output = input;
      output.replace_extension(field.dims.size() == 2 ? ".poly" : ".stl");
    }
    const ContourResult res = export_contour(field, threshold, output);
    if (res.empty_warning) {
      err << "warning: field lies entirely on one side of the threshold; wrote empty geometry\n";
    }
    out << "wrote " << output.string() << " (" << res.primitives
        << (field.dims.size() == 2 ? " polylines" : " triangles") << ")\n";
    return kExitOk;
  }
  const DensityFormat f = parse_density_format(format);
  if (output.empty()) {
    output = input;
    output.replace_extension(f == DensityFormat::pgm8 ? ".pgm" : f == DensityFormat::csv ? ".csv" : ".raw64");
  }
  export_density(field, f, output, ExportOptions{slice});
  out << "wrote " << output.string() << "\n";
  return kExitOk;
}

int cmd_bench(const std::string& suite, const BenchOptions& options, const fs::path& output,
              std::ostream& out) {
  const std::vector<BenchRow> rows = run_bench(suite, options);
  const std::string csv = bench_csv(rows);
  if (output.empty()) {
    out << csv;
  } else {
    write_file_atomic(output, csv);
    out << "wrote " << output.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural structural topology optimization"};
  app.require_subcommand(1);

  fs::path config;
  fs::path out_dir = ".";
  auto* optimize_cmd = app.add_subcommand("optimize", "Train a single structure");
  optimize_cmd->add_option("config", config, "Problem config (JSON)")->required();
  optimize_cmd->add_option("-o,--out", out_dir, "Output directory");

  auto* multi_cmd = app.add_subcommand("multi", "Train a solution space over several subtasks");
  multi_cmd->add_option("config", config, "Problem config (JSON)")->required();
  multi_cmd->add_option("-o,--out", out_dir, "Output directory");

  auto* simp_cmd = app.add_subcommand("simp", "Run the SIMP/OC baseline");
  simp_cmd->add_option("config", config, "Problem config (JSON)")->required();
  simp_cmd->add_option("-o,--out", out_dir, "Output directory");

  fs::path weights;
  int scale = 1;
  std::vector<double> latent;
  std::optional<int> subtask;
  fs::path infer_output = "inferred.raw64";
  auto* infer_cmd = app.add_subcommand("infer", "Evaluate a weight archive on a denser grid");
  infer_cmd->add_option("weights", weights, "Weight archive")->required();
  infer_cmd->add_option("-s,--scale", scale, "Super-resolution factor")->check(CLI::PositiveNumber);
  infer_cmd->add_option("-z,--latent", latent, "Latent code (dual archives)")->delimiter(',');
  infer_cmd->add_option("--subtask", subtask, "Use the stored latent of this subtask");
  infer_cmd->add_option("-o,--output", infer_output, "Output raw64 file");

  fs::path field_path;
  std::string format;
  fs::path export_output;
  double threshold = 0.5;
  int slice = -1;
  auto* export_cmd = app.add_subcommand("export", "Convert a raw64 field");
  export_cmd->add_option("field", field_path, "Input raw64 field")->required();
  export_cmd->add_option("-f,--format", format, "pgm8, raw64, csv or contour")->required();
  export_cmd->add_option("-o,--output", export_output, "Output file");
  export_cmd->add_option("-t,--threshold", threshold, "Contour threshold");
  export_cmd->add_option("--slice", slice, "z slice for pgm8 export of 3D fields");

  std::string suite;
  BenchOptions bench;
  fs::path bench_output;
  auto* bench_cmd = app.add_subcommand("bench", "NSTO vs SIMP comparison table");
  bench_cmd->add_option("suite", suite, "mbb, bridge, lbracket or all")->required();
  bench_cmd->add_option("-d,--deltas", bench.deltas, "Volume fractions")->delimiter(',');
  bench_cmd->add_option("--epochs", bench.train.max_epochs, "NSTO epochs");
  bench_cmd->add_option("--width", bench.network.width, "Network width");
  bench_cmd->add_option("--omega", bench.network.omega, "Frequency hyperparameter");
  bench_cmd->add_option("--seed", bench.network.seed, "Network seed");
  bench_cmd->add_option("--simp-iterations", bench.simp.max_iterations, "SIMP iterations");
  bench_cmd->add_option("--filter-radius", bench.simp.filter_radius, "SIMP filter radius");
  bench_cmd->add_option("-o,--output", bench_output, "Output CSV (default: stdout)");

  std::vector<std::string> rest(args.rbegin(), args.rend());
  if (!rest.empty()) rest.pop_back();  // program name
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  apply_thread_limit(err);
  try {
    if (optimize_cmd->parsed()) return cmd_train(config, out_dir, false, out);
    if (multi_cmd->parsed()) return cmd_train(config, out_dir, true, out);
    if (simp_cmd->parsed()) return cmd_simp(config, out_dir, out);
    if (infer_cmd->parsed()) return cmd_infer(weights, scale, latent, subtask, infer_output, out);
    if (export_cmd->parsed()) {
      return cmd_export(field_path, format, export_output, threshold, slice, out, err);
    }
    if (bench_cmd->parsed()) {
      bench.train.stop_on_convergence = false;
      return cmd_bench(suite, bench, bench_output, out);
    }
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace nsto::io
