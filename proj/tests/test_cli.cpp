#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "nsto/io/archive.hpp"
#include "nsto/io/cli.hpp"
#include "nsto/io/export.hpp"
#include "nsto/io/files.hpp"
#include "nsto/neural/network.hpp"

using namespace nsto;
using namespace nsto::io;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("nsto_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "nsto");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& json) {
  const fs::path p = dir / name;
  write_file_atomic(p, json);
  return p;
}

constexpr const char* kSmallMbb = R"({
  "grid": {"dims": [12, 4]},
  "boundary": {"preset": "mbb"},
  "volume_fraction": 0.4,
  "network": {"width": 16, "depth": 3, "omega": 30, "seed": 3},
  "train": {"max_epochs": 6}
})";

fs::path dual_archive(const fs::path& dir) {
  optimize::NetworkModel m;
  m.kind = optimize::ModelKind::dual;
  m.dual = neural::init_dual(2, 8, 3, 30.0, 1, 2, 5);
  const std::vector<int> dims{6, 3};
  m.grid = mesh::build_grid(dims);
  m.volume_fractions = {0.3, 0.5};
  m.labels = {"a", "b"};
  save_weights(m, dir / "dual.nsto");
  return dir / "dual.nsto";
}

fs::path single_archive(const fs::path& dir) {
  optimize::NetworkModel m;
  m.kind = optimize::ModelKind::single;
  m.oscillator = neural::init_oscillator(2, 8, 3, 30.0, 6);
  const std::vector<int> dims{6, 3};
  m.grid = mesh::build_grid(dims);
  m.volume_fractions = {0.3};
  m.labels = {"mbb"};
  save_weights(m, dir / "single.nsto");
  return dir / "single.nsto";
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({}).code == kExitInvalid);
  CHECK(run({"frobnicate"}).code == kExitInvalid);
  CHECK(run({"infer"}).code == kExitInvalid);
}

TEST_CASE("invalid config exits 1 and names the field") {
  TempDir tmp;
  const auto cfg = write_config(tmp.path, "bad.json", R"({"grid": {"dims": [12, 4]},
      "boundary": {"preset": "mbb"}, "volume_fraction": 1.2})");
  const Run r = run({"optimize", cfg.string(), "-o", tmp.path.string()});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("volume_fraction") != std::string::npos);
  CHECK(run({"optimize", (tmp.path / "missing.json").string()}).code == kExitInvalid);
  CHECK_FALSE(fs::exists(tmp.path / "history.csv"));
}

TEST_CASE("mode mismatch is a usage error") {
  TempDir tmp;
  const auto cfg = write_config(tmp.path, "mbb.json", kSmallMbb);
  CHECK(run({"multi", cfg.string(), "-o", tmp.path.string()}).code == kExitInvalid);
}

TEST_CASE("optimize writes artifacts and is deterministic") {
  TempDir tmp;
  const auto cfg = write_config(tmp.path, "mbb.json", kSmallMbb);
  const fs::path a = tmp.path / "a", b = tmp.path / "b";
  fs::create_directories(a);
  fs::create_directories(b);
  const Run ra = run({"optimize", cfg.string(), "-o", a.string()});
  const Run rb = run({"optimize", cfg.string(), "-o", b.string()});
  REQUIRE(ra.code == kExitOk);
  REQUIRE(rb.code == kExitOk);
  for (const char* f : {"history.csv", "model.nsto", "density.raw64", "density.pgm"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(read_file(a / f) == read_file(b / f));
  }
  const std::string hist = read_file(a / "history.csv");
  CHECK(hist.rfind(std::string(kHistoryHeader) + "\n", 0) == 0);
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 7);
  CHECK(read_raw64(a / "density.raw64").dims == std::vector<int>{12, 4});

  // The archive reproduces the trained field.
  const fs::path inferred = tmp.path / "inferred.raw64";
  REQUIRE(run({"infer", (a / "model.nsto").string(), "-o", inferred.string()}).code == kExitOk);
  CHECK(read_raw64(inferred) == read_raw64(a / "density.raw64"));
}

TEST_CASE("infer scales the field") {
  TempDir tmp;
  const auto w = single_archive(tmp.path);
  const fs::path o = tmp.path / "x3.raw64";
  const Run r = run({"infer", w.string(), "--scale", "3", "-o", o.string()});
  REQUIRE(r.code == kExitOk);
  const DensityField f = read_raw64(o);
  CHECK(f.dims == std::vector<int>{18, 9});
  CHECK(f.scale == 3);
  CHECK(f.values.minCoeff() > 0.0);
  CHECK(f.values.maxCoeff() < 1.0);
  CHECK(run({"infer", w.string(), "--scale", "0"}).code == kExitInvalid);
  CHECK(run({"infer", w.string(), "--latent", "0.5"}).code == kExitInvalid);
}

TEST_CASE("dual archives need exactly one latent source") {
  TempDir tmp;
  const auto w = dual_archive(tmp.path);
  const fs::path o = tmp.path / "o.raw64";
  const Run none = run({"infer", w.string(), "-o", o.string()});
  CHECK(none.code == kExitInvalid);
  CHECK(none.err.find("latent") != std::string::npos);
  CHECK_FALSE(fs::exists(o));
  CHECK(run({"infer", w.string(), "--latent", "0.1", "--subtask", "0", "-o", o.string()}).code ==
        kExitInvalid);
  CHECK(run({"infer", w.string(), "--latent", "0.1,0.2", "-o", o.string()}).code == kExitInvalid);
  CHECK(run({"infer", w.string(), "--subtask", "2", "-o", o.string()}).code == kExitInvalid);
  REQUIRE(run({"infer", w.string(), "--subtask", "1", "-o", o.string()}).code == kExitOk);
  const DensityField by_index = read_raw64(o);
  const auto m = load_weights(w).model;
  std::ostringstream z;
  z.precision(17);
  z << m.dual.latents[1][0];
  REQUIRE(run({"infer", w.string(), "--latent", z.str(), "-o", o.string()}).code == kExitOk);
  CHECK(read_raw64(o) == by_index);
}

TEST_CASE("corrupt archive exits 1") {
  TempDir tmp;
  const auto w = single_archive(tmp.path);
  std::string bytes = read_file(w);
  write_file_atomic(w, bytes.substr(0, bytes.size() / 2));
  CHECK(run({"infer", w.string()}).code == kExitInvalid);
}

TEST_CASE("export formats") {
  TempDir tmp;
  DensityField f;
  f.dims = {3, 3};
  f.values = Eigen::VectorXd::Zero(9);
  f.values[4] = 1.0;
  const fs::path in = tmp.path / "f.raw64";
  export_density(f, DensityFormat::raw64, in);

  REQUIRE(run({"export", in.string(), "-f", "pgm8", "-o", (tmp.path / "f.pgm").string()}).code == kExitOk);
  CHECK(decode_pgm8(read_file(tmp.path / "f.pgm")).pixels[4] == 0);
  REQUIRE(run({"export", in.string(), "-f", "csv", "-o", (tmp.path / "f.csv").string()}).code == kExitOk);
  CHECK(read_file(tmp.path / "f.csv") == encode_csv(f));
  REQUIRE(run({"export", in.string(), "-f", "raw64", "-o", (tmp.path / "g.raw64").string()}).code == kExitOk);
  CHECK(read_file(tmp.path / "g.raw64") == read_file(in));
  const Run c = run({"export", in.string(), "-f", "contour", "-o", (tmp.path / "f.poly").string()});
  REQUIRE(c.code == kExitOk);
  CHECK(read_file(tmp.path / "f.poly").find("polylines 1\n") != std::string::npos);
  CHECK(c.err.empty());

  f.values.setOnes();
  export_density(f, DensityFormat::raw64, in);
  const Run empty = run({"export", in.string(), "-f", "contour", "-o", (tmp.path / "e.poly").string()});
  CHECK(empty.code == kExitOk);
  CHECK(empty.err.find("warning") != std::string::npos);

  CHECK(run({"export", in.string(), "-f", "png"}).code == kExitInvalid);
  CHECK(run({"export", in.string(), "-f", "contour", "-t", "1.5"}).code == kExitInvalid);
  CHECK(run({"export", (tmp.path / "none.raw64").string(), "-f", "csv"}).code == kExitInvalid);
}

TEST_CASE("simp subcommand") {
  TempDir tmp;
  const auto cfg = write_config(tmp.path, "s.json", R"({"grid": {"dims": [12, 4]},
      "boundary": {"preset": "mbb"}, "volume_fraction": 0.5, "simp": {"max_iterations": 5}})");
  const Run r = run({"simp", cfg.string(), "-o", tmp.path.string()});
  REQUIRE(r.code == kExitOk);
  const std::string hist = read_file(tmp.path / "simp_history.csv");
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 6);
  CHECK(fs::exists(tmp.path / "simp_density.raw64"));
}

TEST_CASE("bench writes the comparison table") {
  TempDir tmp;
  const fs::path o = tmp.path / "bench.csv";
  const Run r = run({"bench", "mbb", "-d", "0.5", "--epochs", "2", "--width", "16", "--simp-iterations", "2",
                     "-o", o.string()});
  REQUIRE(r.code == kExitOk);
  const std::string csv = read_file(o);
  CHECK(csv.rfind("benchmark,method,omega,delta,compliance,volume,iterations,seconds\n", 0) == 0);
  CHECK(csv.find("\nmbb,nsto,") != std::string::npos);
  CHECK(csv.find("\nmbb,simp,") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(run({"bench", "cube"}).code == kExitInvalid);
}

TEST_CASE("installed binary reports exit codes") {
  TempDir tmp;
  const auto w = dual_archive(tmp.path);
  const std::string tool = NSTO_TOOL_PATH;
  const auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  CHECK(status(tool + " --help") == 0);
  CHECK(status(tool + " infer " + w.string() + " -o " + (tmp.path / "o.raw64").string()) == 1);
  CHECK(status(tool + " infer " + w.string() + " --subtask 0 -o " + (tmp.path / "o.raw64").string()) == 0);
}
