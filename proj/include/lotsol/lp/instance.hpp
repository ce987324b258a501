#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lotsol/problem.hpp"

namespace lotsol::lp {

/// One constraint row stored sparsely: parallel (column, value) arrays with
/// strictly increasing column indices.
struct SparseRow {
  std::vector<int> cols;
  Vec vals;

  void push(int col, double val) {
    if (val == 0.0) return;
    cols.push_back(col);
    vals.push_back(val);
  }
};

/**
 * A linear program in the fixed shape used throughout this library:
 *
 *   maximize    objective . x
 *   subject to  eq_rows . x  = eq_rhs
 *               ineq_rows . x <= ineq_rhs
 *               x >= 0
 *
 * Lottery discretizations always carry exactly one normalization row
 * (sum of all variables = 1) among the equalities; its index is recorded so
 * consumers can identify it.
 */
struct LpInstance {
  int num_vars = 0;
  Vec objective;
  std::vector<SparseRow> eq_rows;
  Vec eq_rhs;
  std::vector<SparseRow> ineq_rows;
  Vec ineq_rhs;
  int normalization_row = -1;           // index into eq_rows, -1 if absent
  std::vector<std::string> col_labels;  // optional, empty or one per variable

  std::size_t nonzeros() const {
    std::size_t n = 0;
    for (const auto& r : eq_rows) n += r.cols.size();
    for (const auto& r : ineq_rows) n += r.cols.size();
    return n;
  }

  void validate() const {
    if (num_vars <= 0) throw std::invalid_argument("lp: no variables");
    if (static_cast<int>(objective.size()) != num_vars) {
      throw std::invalid_argument("lp: objective size mismatch");
    }
    if (eq_rows.size() != eq_rhs.size() || ineq_rows.size() != ineq_rhs.size()) {
      throw std::invalid_argument("lp: row/rhs count mismatch");
    }
    if (!col_labels.empty() && static_cast<int>(col_labels.size()) != num_vars) {
      throw std::invalid_argument("lp: column label count mismatch");
    }
    auto check_rows = [&](const std::vector<SparseRow>& rows, const Vec& rhs) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!std::isfinite(rhs[r])) throw std::invalid_argument("lp: non-finite rhs");
        const auto& row = rows[r];
        if (row.cols.size() != row.vals.size()) {
          throw std::invalid_argument("lp: sparse row arrays out of step");
        }
        int prev = -1;
        for (std::size_t t = 0; t < row.cols.size(); ++t) {
          if (row.cols[t] <= prev || row.cols[t] >= num_vars) {
            throw std::invalid_argument("lp: sparse row columns not strictly increasing in range");
          }
          if (!std::isfinite(row.vals[t])) {
            throw std::invalid_argument("lp: non-finite coefficient");
          }
          prev = row.cols[t];
        }
      }
    };
    check_rows(eq_rows, eq_rhs);
    check_rows(ineq_rows, ineq_rhs);
    if (normalization_row >= 0) {
      if (normalization_row >= static_cast<int>(eq_rows.size())) {
        throw std::invalid_argument("lp: normalization row index out of range");
      }
      const auto& row = eq_rows[static_cast<std::size_t>(normalization_row)];
      if (static_cast<int>(row.cols.size()) != num_vars ||
          eq_rhs[static_cast<std::size_t>(normalization_row)] != 1.0) {
        throw std::invalid_argument("lp: normalization row must cover all variables with rhs 1");
      }
      for (double v : row.vals) {
        if (v != 1.0) throw std::invalid_argument("lp: normalization row must be all ones");
      }
    }
  }
};

/// Feasibility residuals of a candidate point: largest absolute equality
/// violation and largest positive inequality excess (0 when satisfied).
struct Residuals {
  double max_eq_abs = 0.0;
  double max_ineq_excess = 0.0;
  double min_var = 0.0;
};

inline Residuals feasibility_residuals(const LpInstance& lp, const Vec& x) {
  if (static_cast<int>(x.size()) != lp.num_vars) {
    throw std::invalid_argument("lp: point dimension mismatch");
  }
  Residuals res;
  for (std::size_t r = 0; r < lp.eq_rows.size(); ++r) {
    double acc = -lp.eq_rhs[r];
    const auto& row = lp.eq_rows[r];
    for (std::size_t t = 0; t < row.cols.size(); ++t) {
      acc += row.vals[t] * x[static_cast<std::size_t>(row.cols[t])];
    }
    res.max_eq_abs = std::max(res.max_eq_abs, std::abs(acc));
  }
  for (std::size_t r = 0; r < lp.ineq_rows.size(); ++r) {
    double acc = -lp.ineq_rhs[r];
    const auto& row = lp.ineq_rows[r];
    for (std::size_t t = 0; t < row.cols.size(); ++t) {
      acc += row.vals[t] * x[static_cast<std::size_t>(row.cols[t])];
    }
    res.max_ineq_excess = std::max(res.max_ineq_excess, acc);
  }
  for (double v : x) res.min_var = std::min(res.min_var, v);
  return res;
}

inline double objective_value(const LpInstance& lp, const Vec& x) {
  double acc = 0.0;
  for (int j = 0; j < lp.num_vars; ++j) {
    acc += lp.objective[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
  }
  return acc;
}

}  // namespace lotsol::lp
