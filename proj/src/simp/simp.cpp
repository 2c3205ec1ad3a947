#include "nsto/simp/simp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "nsto/error.hpp"
#include "nsto/fem/fem.hpp"

namespace nsto::simp {

namespace {

constexpr int kMaxDoublings = 60;
constexpr int kMaxBisections = 200;

bool is_free(std::span<const mesh::Passive> passive, std::size_t e) {
  return passive.empty() || passive[e] == mesh::Passive::free;
}

}  // namespace

void SimpConfig::validate() const {
  if (!(penal >= 1.0)) throw InvalidSpecError("simp.penal must be >= 1");
  if (!(filter_radius >= 1.0)) throw InvalidSpecError("simp.filter_radius must be >= 1");
  if (!(move > 0.0 && move <= 1.0)) throw InvalidSpecError("simp.move must lie in (0, 1]");
  if (!(oc_tolerance > 0.0)) throw InvalidSpecError("simp.oc_tolerance must be > 0");
  if (max_iterations < 0) throw InvalidSpecError("simp.max_iterations must be >= 0");
}

DensityFilter::DensityFilter(const mesh::Grid& grid, double radius) {
  if (!(radius >= 1.0)) throw InvalidSpecError("filter radius must be >= 1");
  const int d = grid.dim();
  const int reach = static_cast<int>(std::ceil(radius)) - 1;
  std::vector<Eigen::Triplet<double>> triplets;
  for (int e = 0; e < grid.n_elements(); ++e) {
    const auto ijk = grid.element_ijk(e);
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> hi{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      lo[a] = std::max(ijk[a] - reach, 0);
      hi[a] = std::min(ijk[a] + reach, grid.dims()[a] - 1);
    }
    for (int k = lo[2]; k <= hi[2]; ++k) {
      for (int j = lo[1]; j <= hi[1]; ++j) {
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const std::array<int, 3> other{i, j, k};
          double dist2 = 0.0;
          for (int a = 0; a < d; ++a) dist2 += double(other[a] - ijk[a]) * (other[a] - ijk[a]);
          const double w = radius - std::sqrt(dist2);
          if (w > 0.0) triplets.emplace_back(e, grid.element_index(std::span<const int>(other.data(), d)), w);
        }
      }
    }
  }
  h_.resize(grid.n_elements(), grid.n_elements());
  h_.setFromTriplets(triplets.begin(), triplets.end());
  hs_ = h_ * Eigen::VectorXd::Ones(grid.n_elements());
}

std::vector<double> DensityFilter::apply(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != h_.rows()) throw ShapeError("filter: field length");
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), h_.rows());
  const Eigen::VectorXd y = (h_ * xv).cwiseQuotient(hs_);
  return {y.data(), y.data() + y.size()};
}

std::vector<double> DensityFilter::filter_sensitivity(std::span<const double> x,
                                                      std::span<const double> dc) const {
  const Eigen::Index n = h_.rows();
  if (static_cast<Eigen::Index>(x.size()) != n || static_cast<Eigen::Index>(dc.size()) != n) {
    throw ShapeError("filter_sensitivity: field length");
  }
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
  const Eigen::Map<const Eigen::VectorXd> dcv(dc.data(), n);
  const Eigen::VectorXd y =
      (h_ * xv.cwiseProduct(dcv)).cwiseQuotient(hs_).cwiseQuotient(xv.cwiseMax(1e-3));
  return {y.data(), y.data() + y.size()};
}

std::vector<double> density_filter(std::span<const double> field, double radius,
                                   const mesh::Grid& grid) {
  return DensityFilter(grid, radius).apply(field);
}

OcResult oc_update(std::span<const double> x, std::span<const double> dc,
                   std::span<const double> dv, double delta, const SimpConfig& config,
                   std::span<const mesh::Passive> passive) {
  const std::size_t n = x.size();
  if (dc.size() != n || dv.size() != n || (!passive.empty() && passive.size() != n)) {
    throw ShapeError("oc_update: input lengths differ");
  }
  int n_free = 0;
  for (std::size_t e = 0; e < n; ++e) {
    if (!is_free(passive, e)) continue;
    ++n_free;
    if (!std::isfinite(x[e]) || !std::isfinite(dc[e]) || !(dv[e] > 0.0)) {
      throw NumericalError("oc_update: non-finite density or sensitivity at element " +
                           std::to_string(e));
    }
  }
  if (n_free == 0) throw InvalidSpecError("oc_update: no free elements");

  std::vector<double> out(n);
  const auto trial = [&](double multiplier) {
    double sum = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
      if (!is_free(passive, e)) {
        out[e] = passive[e] == mesh::Passive::solid ? 1.0 : 0.0;
        continue;
      }
      const double lo = std::max(0.0, x[e] - config.move);
      const double hi = std::min(1.0, x[e] + config.move);
      double v;
      if (multiplier == 0.0) {
        v = hi;
      } else if (!std::isfinite(multiplier)) {
        v = lo;
      } else {
        const double ratio = std::max(-dc[e], 0.0) / (multiplier * dv[e]);
        v = std::clamp(x[e] * std::sqrt(ratio), lo, hi);
      }
      out[e] = v;
      sum += v;
    }
    return sum / n_free;
  };

  // Volume is non-increasing in the multiplier; handle the saturated ends first.
  double vol = trial(0.0);
  if (vol <= delta + config.oc_tolerance) return {out, 0.0, vol};
  vol = trial(std::numeric_limits<double>::infinity());
  if (vol >= delta - config.oc_tolerance) {
    return {out, std::numeric_limits<double>::infinity(), vol};
  }

  double lo = 0.0;
  double hi = 1.0;
  int doublings = 0;
  while (trial(hi) > delta) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > kMaxDoublings) {
      throw NumericalError("oc_update: no multiplier bracket within 60 doublings");
    }
  }
  if (doublings == 0) {
    // Shrink the lower end until it gives too much volume.
    lo = hi;
    while (trial(lo) < delta) {
      hi = lo;
      lo *= 0.5;
      if (++doublings > kMaxDoublings) {
        throw NumericalError("oc_update: no multiplier bracket within 60 halvings");
      }
    }
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < kMaxBisections; ++it) {
    mid = 0.5 * (lo + hi);
    vol = trial(mid);
    if (std::abs(vol - delta) <= 0.5 * config.oc_tolerance) return {out, mid, vol};
    if (vol > delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  vol = trial(mid);
  if (std::abs(vol - delta) > config.oc_tolerance) {
    throw NumericalError("oc_update: bisection did not reach the volume target (volume " +
                         std::to_string(vol) + ", target " + std::to_string(delta) + ")");
  }
  return {out, mid, vol};
}

SimpResult simp_optimize(const optimize::Problem& problem, const SimpConfig& config,
                         const optimize::HistorySink& sink) {
  problem.validate();
  config.validate();
  const auto& task = problem.subtasks.front();
  const double delta = task.volume_fraction;
  const fem::FeaSystem fea(problem.grid, problem.material,
                           mesh::resolve_boundary(problem.grid, task.boundary), problem.solver);
  const auto& passive = fea.boundary().passive;
  const DensityFilter filter(problem.grid, config.filter_radius);
  const int n = problem.grid.n_elements();
  const std::vector<double> dv(n, 1.0);

  std::vector<double> x = fem::physical_densities(std::vector<double>(n, delta), passive);
  double multiplier = 0.0;
  SimpResult result;
  for (int it = 0; it < config.max_iterations; ++it) {
    fem::FeaResult fr;
    try {
      fr = fea.evaluate(x, config.penal);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }
    double sum = 0.0;
    int count = 0;
    for (int e = 0; e < n; ++e) {
      if (is_free(passive, e)) {
        sum += x[e];
        ++count;
      }
    }
    const optimize::HistoryRecord record{it, 0, fr.compliance, fr.compliance, sum / count,
                                         multiplier, 0.0, config.penal, fr.stats.iterations};
    result.history.push_back(record);
    if (sink) sink(record);

    const std::vector<double> dc = filter.filter_sensitivity(x, fr.gradient);
    OcResult oc = oc_update(x, dc, dv, delta, config, passive);
    x = std::move(oc.density);
    multiplier = oc.multiplier;
  }
  result.field.dims = problem.grid.dims();
  result.field.scale = 1;
  result.field.values = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
  return result;
}

}  // namespace nsto::simp
