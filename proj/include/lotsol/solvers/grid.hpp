#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lotsol/lagrangian.hpp"
#include "lotsol/problem.hpp"

namespace lotsol {

/**
 * Exhaustive inner solver on a materialized product grid inside the
 * consumption box. Evaluation order is action-major, then lexicographic in
 * the consumption coordinates (coordinate 0 most significant), and a new
 * maximum is accepted only on strict improvement, so ties resolve to the
 * lowest action index and then the lexicographically smallest point.
 */
struct GridInnerSolver {
  std::vector<Vec> coordinate_grids;

  static GridInnerSolver uniform(const std::vector<Interval>& box,
                                 const std::vector<int>& counts) {
    if (box.size() != counts.size()) {
      throw std::invalid_argument("grid solver: one count per coordinate required");
    }
    GridInnerSolver g;
    g.coordinate_grids.resize(box.size());
    for (std::size_t r = 0; r < box.size(); ++r) {
      const int n = counts[r];
      if (n < 1) throw std::invalid_argument("grid solver: counts must be >= 1");
      if (!std::isfinite(box[r].hi)) {
        throw std::invalid_argument("grid solver: cannot grid an unbounded interval");
      }
      Vec& pts = g.coordinate_grids[r];
      pts.resize(static_cast<std::size_t>(n));
      if (n == 1) {
        pts[0] = box[r].lo;
      } else {
        const double step = (box[r].hi - box[r].lo) / (n - 1);
        for (int i = 0; i < n; ++i) pts[static_cast<std::size_t>(i)] = box[r].lo + i * step;
        pts.back() = box[r].hi;  // endpoints exact
      }
    }
    return g;
  }

  static GridInnerSolver uniform(const std::vector<Interval>& box, int count_per_coordinate) {
    return uniform(box, std::vector<int>(box.size(), count_per_coordinate));
  }

  std::size_t total_points() const {
    std::size_t n = 1;
    for (const Vec& g : coordinate_grids) n *= g.size();
    return n;
  }

  InnerResult operator()(const LotteryProblem& p, const MultiplierState& mult) const {
    if (coordinate_grids.size() != static_cast<std::size_t>(p.dim())) {
      throw std::invalid_argument("grid solver: dimension mismatch with problem");
    }
    const std::size_t d = coordinate_grids.size();
    std::vector<std::size_t> idx(d, 0);
    Vec c(d);

    InnerResult best;
    bool have_best = false;
    for (int a = 0; a < p.num_actions(); ++a) {
      std::fill(idx.begin(), idx.end(), 0);
      for (std::size_t r = 0; r < d; ++r) c[r] = coordinate_grids[r][0];
      while (true) {
        const double val = eval_lagrangian(p, a, c, mult);
        if (!have_best || val > best.value) {
          best.a_index = a;
          best.c = c;
          best.value = val;
          have_best = true;
        }
        // odometer: last coordinate fastest, giving lexicographic order
        std::size_t r = d;
        while (r > 0) {
          --r;
          if (++idx[r] < coordinate_grids[r].size()) {
            c[r] = coordinate_grids[r][idx[r]];
            break;
          }
          idx[r] = 0;
          c[r] = coordinate_grids[r][0];
          if (r == 0) goto next_action;
        }
      }
    next_action:;
    }
    return best;
  }
};

/// Exact maximization of the Lagrangian over the action set and grid.
inline InnerResult grid_argmax(const LotteryProblem& p, const MultiplierState& mult,
                               const GridInnerSolver& grid) {
  return grid(p, mult);
}

}  // namespace lotsol
