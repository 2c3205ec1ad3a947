#include <doctest.h>

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nsto/fem/fem.hpp"
#include "nsto/linsolve/multigrid.hpp"
#include "nsto/linsolve/pcg.hpp"
#include "nsto/mesh/benchmarks.hpp"
#include "support/oracles.hpp"

using namespace nsto;
using namespace nsto::linsolve;

namespace {

SparseMatrix to_sparse(const Eigen::MatrixXd& m) { return m.sparseView(); }

SolverConfig jacobi(double tol = 1e-8) {
  SolverConfig c;
  c.preconditioner = PreconditionerKind::jacobi;
  c.tolerance = tol;
  return c;
}

struct Reduced {
  SparseMatrix k;
  Eigen::VectorXd f;
  GridTransfers transfers;
};

Reduced reduced_mbb(int nx, int ny, unsigned seed) {
  const std::vector<int> dims{nx, ny};
  const mesh::Grid g = mesh::build_grid(dims);
  const auto bnd = mesh::resolve_boundary(g, mesh::mbb_half_beam(g));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> rho(g.n_elements());
  for (auto& r : rho) r = u(rng);
  const fem::FeaSystem fea(g, fem::Material{}, bnd);
  Reduced out;
  out.k = fea.assemble_reduced(rho, 3.0);
  std::vector<char> fixed(g.n_dofs(), 0);
  for (int d : bnd.fixed_dofs) fixed[d] = 1;
  out.f.resize(fea.n_free_dofs());
  for (int i = 0, j = 0; i < g.n_dofs(); ++i) {
    if (!fixed[i]) out.f[j++] = bnd.force[i];
  }
  out.transfers = build_grid_transfers(g, bnd.fixed_dofs, 10, 200);
  return out;
}

}  // namespace

TEST_CASE("identity system converges in one iteration") {
  const SparseMatrix a = to_sparse(Eigen::MatrixXd::Identity(7, 7));
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(7, -3, 3);
  const auto [x, stats] = pcg_solve(a, b, jacobi());
  CHECK(stats.iterations == 1);
  CHECK(stats.converged);
  CHECK((x - b).norm() == 0.0);
}

TEST_CASE("diagonal system") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 4;
  const auto [x, stats] = pcg_solve(to_sparse(d), Eigen::Vector2d(2, 8), jacobi());
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
}

TEST_CASE("random SPD system matches a dense solve") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(50, 50);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 50; ++j) m(i, j) = n(rng);
  }
  const Eigen::MatrixXd a = m.transpose() * m + Eigen::MatrixXd::Identity(50, 50);
  Eigen::VectorXd b(50);
  for (int i = 0; i < 50; ++i) b[i] = n(rng);
  const auto [x, stats] = pcg_solve(to_sparse(a), b, jacobi(1e-12));
  const Eigen::VectorXd ref = oracle::gauss_solve(a, b);
  CHECK((x - ref).norm() <= 1e-7 * ref.norm());
  CHECK(stats.final_relative_residual <= 1e-12);
}

TEST_CASE("converged flag agrees with the residual") {
  const Reduced r = reduced_mbb(16, 8, 1);
  SolverConfig c = jacobi(1e-10);
  const auto [x, stats] = pcg_solve(r.k, r.f, c);
  CHECK(stats.converged == (stats.final_relative_residual <= c.tolerance));
  CHECK((r.f - r.k * x).norm() / r.f.norm() <= 1e-10 * 1.0001);

  c.max_iterations = 3;
  try {
    pcg_solve(r.k, r.f, c);
    FAIL("expected non-convergence");
  } catch (const SolverError& e) {
    CHECK(e.stats().iterations == 3);
    CHECK_FALSE(e.stats().converged);
    CHECK(e.stats().final_relative_residual > c.tolerance);
  }
}

TEST_CASE("non-finite right-hand side is reported") {
  Eigen::VectorXd b = Eigen::VectorXd::Ones(4);
  b[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(pcg_solve(to_sparse(Eigen::MatrixXd::Identity(4, 4)), b, jacobi()), SolverError);
}

TEST_CASE("solver configuration is validated") {
  SolverConfig c;
  c.tolerance = 0;
  CHECK_THROWS(c.validate());
  SolverConfig d;
  d.max_iterations = 0;
  CHECK_THROWS(d.validate());
}

TEST_CASE("V-cycle is linear and maps zero to zero") {
  const Reduced r = reduced_mbb(32, 16, 2);
  REQUIRE(r.transfers.levels() >= 2);
  const MultigridHierarchy h(r.k, r.transfers, 0.6, 2);
  CHECK(v_cycle_preconditioner(h, Eigen::VectorXd::Zero(r.f.size())).norm() == 0.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  Eigen::VectorXd a(r.f.size()), b(r.f.size());
  for (int i = 0; i < a.size(); ++i) {
    a[i] = n(rng);
    b[i] = n(rng);
  }
  const Eigen::VectorXd lhs = h.v_cycle(2.0 * a + b);
  const Eigen::VectorXd rhs = 2.0 * h.v_cycle(a) + h.v_cycle(b);
  CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
  // Symmetric: <M a, b> == <a, M b>.
  CHECK(h.v_cycle(a).dot(b) == doctest::Approx(a.dot(h.v_cycle(b))).epsilon(1e-10));
}

TEST_CASE("one-level hierarchy is damped Jacobi smoothing") {
  const Reduced r = reduced_mbb(8, 4, 4);
  const MultigridHierarchy h(r.k, GridTransfers{{}, {static_cast<int>(r.k.rows())}}, 0.6, 2);
  CHECK(h.levels() == 1);
  const Eigen::VectorXd inv_d = r.k.diagonal().cwiseInverse();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(r.f.size());
  for (int s = 0; s < 4; ++s) x += 0.6 * inv_d.cwiseProduct(r.f - r.k * x);
  CHECK((h.v_cycle(r.f) - x).norm() <= 1e-12 * x.norm());
}

TEST_CASE("multigrid needs no more iterations than Jacobi on 96x32 MBB") {
  const std::vector<int> dims{96, 32};
  const mesh::Grid g = mesh::build_grid(dims);
  const auto bnd = mesh::resolve_boundary(g, mesh::mbb_half_beam(g));
  std::vector<double> rho(g.n_elements(), 0.5);
  SolverConfig mg;
  SolverConfig jc = jacobi();
  jc.max_iterations = 20000;
  const auto a = fem::FeaSystem(g, fem::Material{}, bnd, mg).evaluate(rho, 3.0);
  const auto b = fem::FeaSystem(g, fem::Material{}, bnd, jc).evaluate(rho, 3.0);
  MESSAGE("multigrid " << a.stats.iterations << " vs jacobi " << b.stats.iterations);
  CHECK(a.stats.iterations <= b.stats.iterations);
  CHECK((a.displacement - b.displacement).norm() <= 1e-6 * b.displacement.norm());
}

TEST_CASE("solution does not depend on the preconditioner") {
  const Reduced r = reduced_mbb(32, 16, 5);
  SolverConfig c = jacobi(1e-12);
  c.max_iterations = 20000;
  const auto [xj, sj] = pcg_solve(r.k, r.f, c);
  const MultigridHierarchy h(r.k, r.transfers, 0.6, 2);
  const auto [xm, sm] = pcg_solve(r.k, r.f, c, MultigridPreconditioner(h));
  CHECK((xj - xm).norm() <= 1e-8 * xj.norm());
}

TEST_CASE("CG error decreases in the energy norm") {
  const Reduced r = reduced_mbb(24, 8, 6);
  for (bool mg : {false, true}) {
    SolverConfig c = jacobi(1e-10);
    c.record_residuals = true;
    const MultigridHierarchy h(r.k, r.transfers, 0.6, 2);
    const auto stats = mg ? pcg_solve(r.k, r.f, c, MultigridPreconditioner(h)).second
                          : pcg_solve(r.k, r.f, c).second;
    REQUIRE(stats.energies.size() == stats.preconditioned_residuals.size());
    for (std::size_t i = 1; i < stats.energies.size(); ++i) {
      CHECK(stats.energies[i] <= stats.energies[i - 1] + 1e-12 * std::abs(stats.energies[i - 1]));
    }
  }
}

TEST_CASE("preconditioned residual history") {
  const Reduced r = reduced_mbb(32, 16, 7);
  SolverConfig c = jacobi(1e-8);
  c.record_residuals = true;
  const MultigridHierarchy h(r.k, r.transfers, 0.6, 2);
  const auto [x, stats] = pcg_solve(r.k, r.f, c, MultigridPreconditioner(h));
  REQUIRE(stats.preconditioned_residuals.size() == static_cast<std::size_t>(stats.iterations) + 1);
  int increases = 0;
  for (std::size_t i = 1; i < stats.preconditioned_residuals.size(); ++i) {
    increases += stats.preconditioned_residuals[i] >
                 stats.preconditioned_residuals[i - 1] * (1 + 1e-12);
  }
  MESSAGE("non-monotone steps: " << increases << " of " << stats.iterations);
  CHECK(stats.preconditioned_residuals.back() < stats.preconditioned_residuals.front());
}

TEST_CASE("solves are deterministic") {
  const Reduced r = reduced_mbb(32, 16, 8);
  const MultigridHierarchy h(r.k, r.transfers, 0.6, 2);
  const auto a = pcg_solve(r.k, r.f, SolverConfig{}, MultigridPreconditioner(h));
  const auto b = pcg_solve(r.k, r.f, SolverConfig{}, MultigridPreconditioner(h));
  CHECK(a.first == b.first);
  CHECK(a.second.iterations == b.second.iterations);
}

TEST_CASE("grid transfers") {
  const std::vector<int> dims{8, 4};
  const mesh::Grid g = mesh::build_grid(dims);
  const auto bnd = mesh::resolve_boundary(g, mesh::mbb_half_beam(g));
  const auto t = build_grid_transfers(g, bnd.fixed_dofs, 10, 1);
  CHECK(t.levels() == 3);  // 8x4 -> 4x2 -> 2x1, then odd
  for (std::size_t l = 0; l < t.prolongations.size(); ++l) {
    CHECK(t.prolongations[l].rows() == t.level_dofs[l]);
    CHECK(t.prolongations[l].cols() == t.level_dofs[l + 1]);
  }
  const auto none = build_grid_transfers(g, bnd.fixed_dofs, 10, 100000);
  CHECK(none.levels() == 1);
}
