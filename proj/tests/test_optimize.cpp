#include <doctest.h>

#include <cmath>
#include <vector>

#include "nsto/error.hpp"
#include "nsto/fem/fem.hpp"
#include "nsto/mesh/benchmarks.hpp"
#include "nsto/optimize/training.hpp"

using namespace nsto;
using namespace nsto::optimize;

namespace {

Problem small_mbb(double delta, int nx = 24, int ny = 8) {
  const std::vector<int> dims{nx, ny};
  Problem p;
  p.grid = mesh::build_grid(dims);
  p.subtasks = {{delta, mesh::mbb_half_beam(p.grid), "mbb"}};
  return p;
}

NetworkConfig small_net() {
  NetworkConfig n;
  n.width = 128;
  n.depth = 4;
  n.omega = 30.0;
  return n;
}

HistoryRecord rec(double c, double v) {
  HistoryRecord r;
  r.compliance = c;
  r.volume = v;
  return r;
}

}  // namespace

TEST_CASE("augmented Lagrangian arithmetic") {
  CHECK(augmented_lagrangian(10.0, 30.0, 100.0, 0.3, 5.0, 7.0) == 10.0);
  CHECK(augmented_lagrangian(10.0, 0.4, 1.0, 0.3, 0.0, 1.0) == doctest::Approx(10.0001));
  CHECK(augmented_lagrangian(10.0, 0.4, 1.0, 0.3, 2.0, 1.0) == doctest::Approx(10.0201));
}

TEST_CASE("dual update arithmetic") {
  const DualState s{0.0, 5.0, 0};
  const DualState t = dual_update(s, 0.4, 1.0, 0.3, 1.0, 1.1);
  CHECK(t.lambda == doctest::Approx(0.1));
  CHECK(t.k == 1);
  CHECK(t.sigma == doctest::Approx(1.1));
  const DualState same = dual_update(DualState{2.5, 3.0, 4}, 0.3, 1.0, 0.3, 1.0, 1.1);
  CHECK(same.lambda == 2.5);
  DualState k{0.0, 1.0, 0};
  for (int i = 0; i < 10; ++i) k = dual_update(k, 0.5, 1.0, 0.3, 1.0, 1.1);
  CHECK(k.sigma == doctest::Approx(2.5937424601));
}

TEST_CASE("total density gradient") {
  const std::vector<double> dc{-1.0, -2.0, -3.0};
  const auto exact = total_density_gradient(dc, 0.9, 3.0, 0.3, 4.0, 5.0);
  for (int i = 0; i < 3; ++i) CHECK(exact[i] == dc[i]);
  const double g = 1.5 / 3.0 - 0.3;
  const double shift = (2 * 4.0 * g + 4 * 5.0 * g * g * g) / 3.0;
  const auto off = total_density_gradient(dc, 1.5, 3.0, 0.3, 4.0, 5.0);
  for (int i = 0; i < 3; ++i) CHECK(off[i] - dc[i] == doctest::Approx(shift));
  const std::vector<mesh::Passive> passive{mesh::Passive::free, mesh::Passive::void_,
                                           mesh::Passive::solid};
  const auto masked = total_density_gradient(dc, 1.5, 1.0, 0.3, 4.0, 5.0, passive);
  CHECK(masked[1] == 0.0);
  CHECK(masked[2] == 0.0);
}

TEST_CASE("convergence check") {
  const std::vector<HistoryRecord> flat{rec(100, 0.3), rec(100, 0.3)};
  CHECK(check_convergence(flat, 0.3));
  const std::vector<HistoryRecord> drop{rec(100, 0.3), rec(95, 0.3)};
  CHECK_FALSE(check_convergence(drop, 0.3));
  const std::vector<HistoryRecord> vol{rec(100, 0.32), rec(100, 0.32)};
  CHECK_FALSE(check_convergence(vol, 0.3));
  const std::vector<HistoryRecord> edge{rec(100, 0.3), rec(100.29, 0.309)};
  CHECK(check_convergence(edge, 0.3));
  const std::vector<HistoryRecord> one{rec(100, 0.3)};
  CHECK_FALSE(check_convergence(one, 0.3));
}

TEST_CASE("tau schedule and config validation") {
  TrainConfig t;
  CHECK(t.tau_at(0) == 1.5);
  CHECK(t.tau_at(25) == doctest::Approx(2.25));
  CHECK(t.tau_at(50) == 3.0);
  CHECK(t.tau_at(500) == 3.0);
  CHECK(t.initial_sigma(960) == 960.0);
  t.sigma0 = 1.0;
  CHECK(t.initial_sigma(960) == 1.0);
  TrainConfig bad;
  bad.tau_end = 4.0;
  CHECK_THROWS_AS(bad.validate(), InvalidSpecError);
  TrainConfig growth;
  growth.sigma_growth = 1.0;
  CHECK_THROWS_AS(growth.validate(), InvalidSpecError);
  Problem p = small_mbb(1.2);
  CHECK_THROWS_AS(p.validate(), InvalidSpecError);
}

TEST_CASE("zero-epoch run returns the initialized model") {
  TrainConfig t;
  t.max_epochs = 0;
  const auto m = train_single(small_mbb(0.4), small_net(), t);
  CHECK(m.state.history.empty());
  CHECK(m.state.epochs == 0);
  CHECK(m.model.oscillator == neural::init_oscillator(2, 128, 4, 30.0, 0));
}

TEST_CASE("training invariants on a small MBB") {
  TrainConfig t;
  t.max_epochs = 150;
  t.stop_on_convergence = false;
  const Problem p = small_mbb(0.4);
  std::vector<HistoryRecord> sunk;
  const auto m = train_single(p, small_net(), t, [&](const HistoryRecord& r) { sunk.push_back(r); });
  const auto& h = m.state.history;
  REQUIRE(h.size() == 150);
  CHECK(sunk == h);
  const double v0 = p.grid.n_elements();
  for (std::size_t k = 0; k < h.size(); ++k) {
    CHECK(h[k].epoch == static_cast<int>(k));
    CHECK(h[k].sigma == doctest::Approx(v0 * std::pow(1.1, static_cast<double>(k))).epsilon(1e-12));
    CHECK(h[k].tau >= 1.5);
    CHECK(h[k].tau <= 3.0);
    if (k > 0) CHECK(h[k].lambda >= h[k - 1].lambda);
    const double g = h[k].volume - 0.4;
    CHECK(h[k].loss - h[k].compliance ==
          doctest::Approx(h[k].lambda * g * g + h[k].sigma * g * g * g * g).epsilon(1e-9));
    CHECK(h[k].compliance > 0.0);
  }
  CHECK(std::abs(h.back().volume - 0.4) < 0.015);
  CHECK(h.back().compliance < h.front().compliance);
}

TEST_CASE("scale-1 inference reproduces the trained network bitwise") {
  TrainConfig t;
  t.max_epochs = 5;
  const auto m = train_single(small_mbb(0.4), small_net(), t);
  const DensityField f = infer(m, 1);
  CHECK(f == m.final_densities.front());
  const auto coords = mesh::sample_coordinates(m.problem.grid, 1).points;
  const Eigen::VectorXd direct = neural::forward_oscillator(m.model.oscillator, coords).densities.col(0);
  CHECK(f.values == direct);
  const DensityField f3 = infer(m, 3);
  CHECK(f3.dims == std::vector<int>{72, 24});
  CHECK(f3.scale == 3);
  CHECK(f3.values.minCoeff() > 0.0);
  CHECK(f3.values.maxCoeff() < 1.0);
  CHECK_THROWS_AS(infer(m, 1, Eigen::VectorXd::Zero(1)), UsageError);
  CHECK_THROWS_AS(infer(m, 0), InvalidSpecError);
}

namespace {

struct SolidRun {
  DensityField field;
  double compliance = 0.0;
  double solid_compliance = 0.0;
};

const SolidRun& solid_run() {
  static const SolidRun run = [] {
    TrainConfig t;
    t.max_epochs = 150;
    t.stop_on_convergence = false;
    const Problem p = small_mbb(1.0, 12, 4);
    const auto m = train_single(p, small_net(), t);
    const fem::FeaSystem fea(p.grid, p.material,
                             mesh::resolve_boundary(p.grid, p.subtasks[0].boundary));
    SolidRun r;
    r.field = m.final_densities.front();
    const std::vector<double> rho(r.field.values.data(), r.field.values.data() + r.field.size());
    r.compliance = fea.evaluate(rho, 3.0).compliance;
    r.solid_compliance = fea.evaluate(std::vector<double>(p.grid.n_elements(), 1.0), 3.0).compliance;
    return r;
  }();
  return run;
}

}  // namespace

TEST_CASE("unconstrained problem fills the domain") {
  const SolidRun& r = solid_run();
  MESSAGE("min density " << r.field.values.minCoeff() << ", compliance " << r.compliance
                         << " vs solid " << r.solid_compliance);
  CHECK(r.field.values.minCoeff() > 0.9);
  CHECK(volume_fraction(r.field) > 0.95);
}

TEST_CASE("unconstrained compliance approaches the full-solid value" * doctest::may_fail()) {
  const SolidRun& r = solid_run();
  CHECK(r.compliance == doctest::Approx(r.solid_compliance).epsilon(0.02));
}

TEST_CASE("training is deterministic") {
  TrainConfig t;
  t.max_epochs = 8;
  const auto a = train_single(small_mbb(0.3), small_net(), t);
  const auto b = train_single(small_mbb(0.3), small_net(), t);
  CHECK(a.state.history == b.state.history);
  CHECK(a.model == b.model);
}

TEST_CASE("subtask count contracts") {
  Problem two = small_mbb(0.3);
  two.subtasks.push_back(two.subtasks.front());
  TrainConfig t;
  t.max_epochs = 1;
  CHECK_THROWS_AS(train_single(two, small_net(), t), InvalidSpecError);
  CHECK_THROWS_AS(train_multi(small_mbb(0.3), small_net(), t), InvalidSpecError);
  Problem none = small_mbb(0.3);
  none.subtasks.clear();
  CHECK_THROWS_AS(train_single(none, small_net(), t), InvalidSpecError);
}

TEST_CASE("identical subtasks give matching compliance" * doctest::may_fail()) {
  Problem p = small_mbb(0.4);
  p.subtasks.push_back(p.subtasks.front());
  TrainConfig t;
  t.max_epochs = 150;
  const auto m = train_multi(p, small_net(), t);
  REQUIRE(m.model.dual.latents.size() == 2);
  const fem::FeaSystem fea(p.grid, p.material, mesh::resolve_boundary(p.grid, p.subtasks[0].boundary));
  std::vector<double> c;
  for (int i = 0; i < 2; ++i) {
    const DensityField f = infer(m, 1, m.model.dual.latents[i]);
    CHECK(f == m.final_densities[i]);
    const std::vector<double> rho(f.values.data(), f.values.data() + f.values.size());
    c.push_back(fea.evaluate(rho, 3.0).compliance);
  }
  MESSAGE("compliances " << c[0] << " " << c[1]);
  CHECK(c[0] == doctest::Approx(c[1]).epsilon(0.01));
}

TEST_CASE("dual inference needs a latent of the right size") {
  Problem p = small_mbb(0.4);
  p.subtasks.push_back(p.subtasks.front());
  TrainConfig t;
  t.max_epochs = 2;
  const auto m = train_multi(p, small_net(), t);
  for (int i = 0; i < 2; ++i) CHECK(infer(m, 1, m.model.dual.latents[i]) == m.final_densities[i]);
  CHECK_THROWS_AS(infer(m, 1), UsageError);
  CHECK_THROWS_AS(infer(m, 1, Eigen::VectorXd::Zero(2)), ShapeError);
}

TEST_CASE("multi-subtask history and dual states are per subtask") {
  Problem p = small_mbb(0.3, 16, 8);
  p.subtasks.push_back({0.5, mesh::mbb_half_beam(p.grid), "b"});
  TrainConfig t;
  t.max_epochs = 6;
  t.stop_on_convergence = false;
  const auto m = train_multi(p, small_net(), t);
  REQUIRE(m.state.history.size() == 12);
  for (std::size_t k = 0; k < m.state.history.size(); ++k) {
    CHECK(m.state.history[k].subtask == static_cast<int>(k % 2));
    CHECK(m.state.history[k].epoch == static_cast<int>(k / 2));
  }
  CHECK(m.state.duals.size() == 2);
  CHECK(m.state.duals[0].lambda != m.state.duals[1].lambda);
  CHECK(m.model.volume_fractions == std::vector<double>{0.3, 0.5});
}

TEST_CASE("interpolated latent lands between its neighbours" * doctest::may_fail()) {
  Problem p = small_mbb(0.3);
  p.subtasks.push_back({0.5, mesh::mbb_half_beam(p.grid), "b"});
  TrainConfig t;
  t.max_epochs = 200;
  const auto m = train_multi(p, small_net(), t);
  const auto& z = m.model.dual.latents;
  const double v0 = volume_fraction(infer(m, 1, z[0]));
  const double v1 = volume_fraction(infer(m, 1, z[1]));
  const double vm = volume_fraction(infer(m, 1, Eigen::VectorXd(0.5 * (z[0] + z[1]))));
  MESSAGE("volumes " << v0 << " " << vm << " " << v1);
  CHECK(vm > std::min(v0, v1));
  CHECK(vm < std::max(v0, v1));
}

TEST_CASE("support-position subtasks all converge") {
  const std::vector<int> dims{24, 8};
  Problem p;
  p.grid = mesh::build_grid(dims);
  for (int i = 1; i <= 3; ++i) {
    p.subtasks.push_back({0.4, mesh::mbb_support_variant(p.grid, i + 2, 5), "s" + std::to_string(i)});
  }
  TrainConfig t;
  t.max_epochs = 300;
  const auto m = train_multi(p, small_net(), t);
  CHECK(m.state.converged);
}

TEST_CASE("volume fraction ignores passive elements") {
  DensityField f;
  f.dims = {2, 2};
  f.values = Eigen::Vector4d(1.0, 0.5, 0.0, 0.0);
  const std::vector<mesh::Passive> passive{mesh::Passive::free, mesh::Passive::free,
                                           mesh::Passive::void_, mesh::Passive::free};
  CHECK(volume_fraction(f) == doctest::Approx(0.375));
  CHECK(volume_fraction(f, passive) == doctest::Approx(0.5));
}
