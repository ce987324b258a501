#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include "lotsol/lp/instance.hpp"

namespace lotsol::lp {

namespace detail {

inline std::string mps_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  if (std::string(buf).size() > 12) std::snprintf(buf, sizeof(buf), "%.5e", v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

/**
 * Writes the instance in fixed MPS format. Row names are E<k>/L<k> for
 * equalities/inequalities, columns X<k>, objective row OBJ. The objective is
 * a maximization; an OBJSENSE section says so, and a leading comment warns
 * readers whose MPS dialect ignores OBJSENSE (they should negate OBJ).
 */
inline void write_mps(std::ostream& os, const LpInstance& lp,
                      const std::string& name = "LOTTERY") {
  lp.validate();
  auto eq_name = [](std::size_t r) { return "E" + std::to_string(r + 1); };
  auto ineq_name = [](std::size_t r) { return "L" + std::to_string(r + 1); };
  auto col_name = [](int j) { return "X" + std::to_string(j + 1); };

  os << "* Maximization problem: honor OBJSENSE MAX or negate the OBJ row.\n";
  os << "NAME          " << name << "\n";
  os << "OBJSENSE\n    MAX\n";
  os << "ROWS\n";
  os << " N  OBJ\n";
  for (std::size_t r = 0; r < lp.eq_rows.size(); ++r) os << " E  " << eq_name(r) << "\n";
  for (std::size_t r = 0; r < lp.ineq_rows.size(); ++r) os << " L  " << ineq_name(r) << "\n";

  // Column-major entries: gather each variable's rows. Build a per-column
  // index over the sparse rows once.
  std::vector<std::vector<std::pair<std::string, double>>> by_col(
      static_cast<std::size_t>(lp.num_vars));
  for (int j = 0; j < lp.num_vars; ++j) {
    const double c = lp.objective[static_cast<std::size_t>(j)];
    if (c != 0.0) by_col[static_cast<std::size_t>(j)].emplace_back("OBJ", c);
  }
  for (std::size_t r = 0; r < lp.eq_rows.size(); ++r) {
    const auto& row = lp.eq_rows[r];
    for (std::size_t t = 0; t < row.cols.size(); ++t) {
      by_col[static_cast<std::size_t>(row.cols[t])].emplace_back(eq_name(r), row.vals[t]);
    }
  }
  for (std::size_t r = 0; r < lp.ineq_rows.size(); ++r) {
    const auto& row = lp.ineq_rows[r];
    for (std::size_t t = 0; t < row.cols.size(); ++t) {
      by_col[static_cast<std::size_t>(row.cols[t])].emplace_back(ineq_name(r), row.vals[t]);
    }
  }

  os << "COLUMNS\n";
  for (int j = 0; j < lp.num_vars; ++j) {
    const auto& entries = by_col[static_cast<std::size_t>(j)];
    for (std::size_t t = 0; t < entries.size(); t += 2) {
      os << "    " << detail::pad(col_name(j), 10) << detail::pad(entries[t].first, 10)
         << detail::mps_number(entries[t].second);
      if (t + 1 < entries.size()) {
        os << "   " << detail::pad(entries[t + 1].first, 10)
           << detail::mps_number(entries[t + 1].second);
      }
      os << "\n";
    }
  }

  os << "RHS\n";
  for (std::size_t r = 0; r < lp.eq_rows.size(); ++r) {
    if (lp.eq_rhs[r] != 0.0) {
      os << "    RHS       " << detail::pad(eq_name(r), 10) << detail::mps_number(lp.eq_rhs[r])
         << "\n";
    }
  }
  for (std::size_t r = 0; r < lp.ineq_rows.size(); ++r) {
    if (lp.ineq_rhs[r] != 0.0) {
      os << "    RHS       " << detail::pad(ineq_name(r), 10)
         << detail::mps_number(lp.ineq_rhs[r]) << "\n";
    }
  }
  os << "BOUNDS\nENDATA\n";
}

}  // namespace lotsol::lp
