#include "nsto/linsolve/multigrid.hpp"

#include <array>
#include <string>

namespace nsto::linsolve {

namespace {

struct AxisWeights {
  int count = 0;
  std::array<int, 2> index{};
  std::array<double, 2> weight{};
};

AxisWeights axis_weights(int fine_index) {
  AxisWeights w;
  if (fine_index % 2 == 0) {
    w.count = 1;
    w.index[0] = fine_index / 2;
    w.weight[0] = 1.0;
  } else {
    w.count = 2;
    w.index = {(fine_index - 1) / 2, (fine_index + 1) / 2};
    w.weight = {0.5, 0.5};
  }
  return w;
}

// Maps every DOF of `grid` to its index among the free DOFs, or -1.
std::vector<int> free_index_map(int n_dofs, const std::vector<char>& fixed) {
  std::vector<int> map(n_dofs, -1);
  int next = 0;
  for (int i = 0; i < n_dofs; ++i) {
    if (!fixed[i]) map[i] = next++;
  }
  return map;
}

}  // namespace

GridTransfers build_grid_transfers(const mesh::Grid& grid, std::span<const int> fixed_dofs,
                                   int max_levels, int min_coarse_dofs) {
  GridTransfers out;
  mesh::Grid fine = grid;
  std::vector<char> fine_fixed(fine.n_dofs(), 0);
  for (int dof : fixed_dofs) fine_fixed[dof] = 1;
  std::vector<int> fine_map = free_index_map(fine.n_dofs(), fine_fixed);
  int fine_free = 0;
  for (int v : fine_map) fine_free += v >= 0;
  out.level_dofs.push_back(fine_free);

  const int d = grid.dim();
  while (out.levels() < max_levels && fine_free > min_coarse_dofs) {
    bool even = true;
    for (int a = 0; a < d; ++a) even = even && fine.dims()[a] % 2 == 0;
    if (!even) break;

    std::vector<int> cdims(d);
    std::vector<double> csize(d);
    for (int a = 0; a < d; ++a) {
      cdims[a] = fine.dims()[a] / 2;
      csize[a] = fine.element_size()[a] * 2.0;
    }
    mesh::Grid coarse(cdims, csize);

    std::vector<char> coarse_fixed(coarse.n_dofs(), 0);
    for (int n = 0; n < coarse.n_nodes(); ++n) {
      auto ijk = coarse.node_ijk(n);
      for (int a = 0; a < d; ++a) ijk[a] *= 2;
      const int fn = fine.node_index(ijk);
      for (int c = 0; c < d; ++c) coarse_fixed[d * n + c] = fine_fixed[d * fn + c];
    }
    std::vector<int> coarse_map = free_index_map(coarse.n_dofs(), coarse_fixed);
    int coarse_free = 0;
    for (int v : coarse_map) coarse_free += v >= 0;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(fine_free) * (d == 2 ? 4 : 8));
    for (int n = 0; n < fine.n_nodes(); ++n) {
      const auto ijk = fine.node_ijk(n);
      std::array<AxisWeights, 3> w{};
      for (int a = 0; a < 3; ++a) w[a] = a < d ? axis_weights(ijk[a]) : AxisWeights{1, {0, 0}, {1.0, 0.0}};
      for (int iz = 0; iz < w[2].count; ++iz) {
        for (int iy = 0; iy < w[1].count; ++iy) {
          for (int ix = 0; ix < w[0].count; ++ix) {
            const std::array<int, 3> cijk{w[0].index[ix], w[1].index[iy], w[2].index[iz]};
            const double weight = w[0].weight[ix] * w[1].weight[iy] * w[2].weight[iz];
            const int cn = coarse.node_index(cijk);
            for (int c = 0; c < d; ++c) {
              const int row = fine_map[d * n + c];
              const int col = coarse_map[d * cn + c];
              if (row >= 0 && col >= 0) triplets.emplace_back(row, col, weight);
            }
          }
        }
      }
    }
    SparseMatrix p(fine_free, coarse_free);
    p.setFromTriplets(triplets.begin(), triplets.end());
    out.prolongations.push_back(std::move(p));
    out.level_dofs.push_back(coarse_free);

    fine = coarse;
    fine_fixed = std::move(coarse_fixed);
    fine_map = std::move(coarse_map);
    fine_free = coarse_free;
  }
  return out;
}

MultigridHierarchy::MultigridHierarchy(const SparseMatrix& fine, const GridTransfers& transfers,
                                       double damping, int sweeps, int max_direct_dofs)
    : damping_(damping), sweeps_(sweeps) {
  if (transfers.level_dofs.empty() || transfers.level_dofs.front() != fine.rows()) {
    throw ShapeError("multigrid: operator size does not match the grid transfers");
  }
  operators_.push_back(fine);
  for (const auto& p : transfers.prolongations) {
    SparseMatrix r = p.transpose();
    SparseMatrix ap = operators_.back() * p;
    SparseMatrix coarse = r * ap;
    operators_.push_back(std::move(coarse));
    prolongations_.push_back(p);
    restrictions_.push_back(std::move(r));
  }
  for (const auto& a : operators_) {
    Eigen::VectorXd d = a.diagonal();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!(d[i] > 0.0)) throw NumericalError("multigrid: non-positive diagonal entry");
      d[i] = 1.0 / d[i];
    }
    inv_diag_.push_back(std::move(d));
  }
  if (levels() > 1) {
    const auto& coarsest = operators_.back();
    if (coarsest.rows() > max_direct_dofs) {
      throw InvalidSpecError("multigrid: coarsest level has " + std::to_string(coarsest.rows()) +
                             " DOFs, above the direct-solve limit of " +
                             std::to_string(max_direct_dofs));
    }
    coarse_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    coarse_->compute(Eigen::SparseMatrix<double>(coarsest));
    if (coarse_->info() != Eigen::Success) {
      throw InvalidSpecError("multigrid: coarsest level is not directly solvable");
    }
  }
}

void MultigridHierarchy::smooth(int level, const Eigen::VectorXd& r, Eigen::VectorXd& x) const {
  const auto& a = operators_[level];
  const auto& inv_d = inv_diag_[level];
  for (int s = 0; s < sweeps_; ++s) {
    Eigen::VectorXd res = r - a * x;
    x.noalias() += damping_ * inv_d.cwiseProduct(res);
  }
}

Eigen::VectorXd MultigridHierarchy::cycle(int level, const Eigen::VectorXd& r) const {
  if (level == levels() - 1 && coarse_) return coarse_->solve(r);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(r.size());
  smooth(level, r, x);
  if (level + 1 < levels()) {
    Eigen::VectorXd res = r - operators_[level] * x;
    Eigen::VectorXd rc = restrictions_[level] * res;
    x.noalias() += prolongations_[level] * cycle(level + 1, rc);
  }
  smooth(level, r, x);
  return x;
}

Eigen::VectorXd MultigridHierarchy::v_cycle(const Eigen::VectorXd& residual) const {
  if (residual.size() != operators_.front().rows()) {
    throw ShapeError("v_cycle: residual length does not match the fine operator");
  }
  return cycle(0, residual);
}

Eigen::VectorXd v_cycle_preconditioner(const MultigridHierarchy& hierarchy,
                                       const Eigen::VectorXd& residual) {
  return hierarchy.v_cycle(residual);
}

}  // namespace nsto::linsolve
