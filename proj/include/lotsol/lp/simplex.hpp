#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lotsol/lp/instance.hpp"

namespace lotsol::lp {

enum class SimplexStatus { Optimal, Infeasible, Unbounded, Stalled };

inline const char* to_string(SimplexStatus s) {
  switch (s) {
    case SimplexStatus::Optimal: return "optimal";
    case SimplexStatus::Infeasible: return "infeasible";
    case SimplexStatus::Unbounded: return "unbounded";
    case SimplexStatus::Stalled: return "stalled";
  }
  return "unknown";
}

struct SimplexOptions {
  long max_pivots = 1'000'000;       // combined over both phases -> Stalled
  double tol = 1e-9;                 // pivot / reduced-cost tolerance
  double feas_tol = 1e-7;            // phase-1 objective threshold for infeasibility
  std::size_t max_tableau_cells = 50'000'000;  // dense allocation guard (~400 MB)
};

struct SimplexResult {
  SimplexStatus status = SimplexStatus::Stalled;
  double objective = std::numeric_limits<double>::quiet_NaN();
  Vec x;            // basic optimal point (structural variables), empty unless optimal
  long pivots = 0;
  int redundant_rows = 0;  // equality rows found linearly dependent and dropped
};

/**
 * Dense two-phase primal simplex with Bland's anti-cycling rule.
 *
 * The instance is converted to standard form (slacks on inequalities,
 * artificials on equalities and on inequalities whose slack cannot start
 * basic), phase 1 minimizes the artificial sum, dependent equality rows are
 * driven out of the basis or deactivated, and phase 2 maximizes the original
 * objective. Bland's rule (lowest eligible index enters; ratio ties leave by
 * lowest basis index) guarantees termination without cycling at the cost of
 * speed, which is acceptable for the oracle-sized instances this solver is
 * meant for.
 */
inline SimplexResult simplex_solve(const LpInstance& lp, const SimplexOptions& opts = {}) {
  lp.validate();
  const int n = lp.num_vars;
  const int n_eq = static_cast<int>(lp.eq_rows.size());
  const int n_ineq = static_cast<int>(lp.ineq_rows.size());
  const int rows = n_eq + n_ineq;
  if (rows == 0) {
    // Maximize over x >= 0 with no constraints: bounded iff no positive cost.
    SimplexResult res;
    for (double cj : lp.objective) {
      if (cj > opts.tol) {
        res.status = SimplexStatus::Unbounded;
        return res;
      }
    }
    res.status = SimplexStatus::Optimal;
    res.objective = 0.0;
    res.x.assign(static_cast<std::size_t>(n), 0.0);
    return res;
  }

  // Column layout: structural | slack | artificial. Artificials are created
  // for every equality row and for inequalities flipped to nonnegative rhs.
  const int slack0 = n;
  int art0 = n + n_ineq;
  std::vector<int> art_col(static_cast<std::size_t>(rows), -1);
  int n_art = 0;
  {
    for (int r = 0; r < n_eq; ++r) art_col[static_cast<std::size_t>(r)] = art0 + n_art++;
    for (int r = 0; r < n_ineq; ++r) {
      if (lp.ineq_rhs[static_cast<std::size_t>(r)] < 0.0) {
        art_col[static_cast<std::size_t>(n_eq + r)] = art0 + n_art++;
      }
    }
  }
  const int cols = n + n_ineq + n_art;

  const std::size_t cells =
      (static_cast<std::size_t>(rows) + 2) * (static_cast<std::size_t>(cols) + 1);
  if (cells > opts.max_tableau_cells) {
    throw std::length_error("simplex: dense tableau would need " + std::to_string(cells) +
                            " cells (cap " + std::to_string(opts.max_tableau_cells) +
                            "); instance too large for the dense oracle solver");
  }

  // Tableau: rows x (cols + 1 rhs), plus two reduced-cost rows updated by the
  // same eliminations (phase-1 costs and phase-2 costs).
  std::vector<Vec> T(static_cast<std::size_t>(rows), Vec(static_cast<std::size_t>(cols) + 1, 0.0));
  auto fill_row = [&](int r, const SparseRow& row, double rhs, bool is_eq, int ineq_index) {
    const double sign = rhs < 0.0 ? -1.0 : 1.0;
    Vec& t = T[static_cast<std::size_t>(r)];
    for (std::size_t k = 0; k < row.cols.size(); ++k) {
      t[static_cast<std::size_t>(row.cols[k])] = sign * row.vals[k];
    }
    if (!is_eq) t[static_cast<std::size_t>(slack0 + ineq_index)] = sign;
    if (art_col[static_cast<std::size_t>(r)] >= 0) {
      t[static_cast<std::size_t>(art_col[static_cast<std::size_t>(r)])] = 1.0;
    }
    t[static_cast<std::size_t>(cols)] = sign * rhs;
  };
  for (int r = 0; r < n_eq; ++r) {
    fill_row(r, lp.eq_rows[static_cast<std::size_t>(r)], lp.eq_rhs[static_cast<std::size_t>(r)],
             true, -1);
  }
  for (int r = 0; r < n_ineq; ++r) {
    fill_row(n_eq + r, lp.ineq_rows[static_cast<std::size_t>(r)],
             lp.ineq_rhs[static_cast<std::size_t>(r)], false, r);
  }

  std::vector<int> basis(static_cast<std::size_t>(rows));
  std::vector<char> active(static_cast<std::size_t>(rows), 1);
  for (int r = 0; r < rows; ++r) {
    basis[static_cast<std::size_t>(r)] =
        art_col[static_cast<std::size_t>(r)] >= 0 ? art_col[static_cast<std::size_t>(r)]
                                                  : slack0 + (r - n_eq);
  }

  // Reduced-cost rows: rc[j] = cost_j - cost_B . T[:, j]; last cell carries
  // -(current objective of that cost vector).
  Vec rc1(static_cast<std::size_t>(cols) + 1, 0.0);  // phase 1: minimize sum of artificials
  Vec rc2(static_cast<std::size_t>(cols) + 1, 0.0);  // phase 2: minimize -objective
  for (int j = 0; j < cols; ++j) {
    if (j >= art0) rc1[static_cast<std::size_t>(j)] = 1.0;
    if (j < n) rc2[static_cast<std::size_t>(j)] = -lp.objective[static_cast<std::size_t>(j)];
  }
  for (int r = 0; r < rows; ++r) {
    if (art_col[static_cast<std::size_t>(r)] < 0) continue;  // basic slack has zero phase-1 cost
    const Vec& t = T[static_cast<std::size_t>(r)];
    for (int j = 0; j <= cols; ++j) rc1[static_cast<std::size_t>(j)] -= t[static_cast<std::size_t>(j)];
    rc1[static_cast<std::size_t>(art_col[static_cast<std::size_t>(r)])] = 0.0;
  }

  SimplexResult res;
  auto pivot = [&](int pr, int pc) {
    Vec& prow = T[static_cast<std::size_t>(pr)];
    const double pv = prow[static_cast<std::size_t>(pc)];
    for (int j = 0; j <= cols; ++j) prow[static_cast<std::size_t>(j)] /= pv;
    prow[static_cast<std::size_t>(pc)] = 1.0;
    auto eliminate = [&](Vec& row) {
      const double f = row[static_cast<std::size_t>(pc)];
      if (f == 0.0) return;
      for (int j = 0; j <= cols; ++j) {
        row[static_cast<std::size_t>(j)] -= f * prow[static_cast<std::size_t>(j)];
      }
      row[static_cast<std::size_t>(pc)] = 0.0;
    };
    for (int r = 0; r < rows; ++r) {
      if (r != pr && active[static_cast<std::size_t>(r)]) eliminate(T[static_cast<std::size_t>(r)]);
    }
    eliminate(rc1);
    eliminate(rc2);
    basis[static_cast<std::size_t>(pr)] = pc;
    ++res.pivots;
  };

  // Bland's rule iteration for one cost row; `allow` filters entering columns.
  auto run_phase = [&](Vec& rc, auto&& allow) -> SimplexStatus {
    for (;;) {
      if (res.pivots >= opts.max_pivots) return SimplexStatus::Stalled;
      int enter = -1;
      for (int j = 0; j < cols; ++j) {
        if (rc[static_cast<std::size_t>(j)] < -opts.tol && allow(j)) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return SimplexStatus::Optimal;
      // Ratio test, two passes: find the minimum ratio, then break ties by the
      // lowest basic-variable index (Bland).
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < rows; ++r) {
        if (!active[static_cast<std::size_t>(r)]) continue;
        const double a = T[static_cast<std::size_t>(r)][static_cast<std::size_t>(enter)];
        if (a > opts.tol) {
          best = std::min(best, T[static_cast<std::size_t>(r)][static_cast<std::size_t>(cols)] / a);
        }
      }
      if (!std::isfinite(best)) return SimplexStatus::Unbounded;
      int leave = -1;
      for (int r = 0; r < rows; ++r) {
        if (!active[static_cast<std::size_t>(r)]) continue;
        const double a = T[static_cast<std::size_t>(r)][static_cast<std::size_t>(enter)];
        if (a > opts.tol &&
            T[static_cast<std::size_t>(r)][static_cast<std::size_t>(cols)] / a <= best + opts.tol &&
            (leave < 0 ||
             basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(leave)])) {
          leave = r;
        }
      }
      pivot(leave, enter);
    }
  };

  // Phase 1: drive the artificial sum to zero.
  if (n_art > 0) {
    const SimplexStatus s1 = run_phase(rc1, [&](int j) { return j < art0; });
    if (s1 == SimplexStatus::Stalled) return res;
    const double phase1 = -rc1[static_cast<std::size_t>(cols)];
    if (s1 == SimplexStatus::Unbounded || phase1 > opts.feas_tol) {
      // The phase-1 objective is bounded below by zero, so Unbounded cannot
      // really occur; treat defensively as infeasible evidence.
      res.status = SimplexStatus::Infeasible;
      return res;
    }
    // Drive remaining artificials out of the basis; an all-zero structural
    // row marks a dependent equality and is deactivated.
    for (int r = 0; r < rows; ++r) {
      if (!active[static_cast<std::size_t>(r)] || basis[static_cast<std::size_t>(r)] < art0) {
        continue;
      }
      int pc = -1;
      for (int j = 0; j < art0; ++j) {
        if (std::abs(T[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]) > opts.tol) {
          pc = j;
          break;
        }
      }
      if (pc >= 0) {
        pivot(r, pc);
      } else {
        active[static_cast<std::size_t>(r)] = 0;
        ++res.redundant_rows;
      }
    }
  }

  // Phase 2 on the original objective.
  const SimplexStatus s2 = run_phase(rc2, [&](int j) { return j < art0; });
  if (s2 == SimplexStatus::Stalled) return res;
  if (s2 == SimplexStatus::Unbounded) {
    res.status = SimplexStatus::Unbounded;
    return res;
  }

  res.status = SimplexStatus::Optimal;
  res.x.assign(static_cast<std::size_t>(n), 0.0);
  for (int r = 0; r < rows; ++r) {
    if (!active[static_cast<std::size_t>(r)]) continue;
    const int b = basis[static_cast<std::size_t>(r)];
    if (b < n) {
      res.x[static_cast<std::size_t>(b)] = T[static_cast<std::size_t>(r)][static_cast<std::size_t>(cols)];
    }
  }
  // rc2's last cell tracks -(phase-2 objective) = +maximized objective.
  res.objective = rc2[static_cast<std::size_t>(cols)];
  return res;
}

}  // namespace lotsol::lp
