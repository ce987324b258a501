#pragma once

/**
 * Artifact serialization for the command-line front-end.
 *
 * Every file starts with (or contains) the run's config hash so outputs can
 * be traced to exact settings. All writers are deterministic: the same
 * inputs produce byte-identical files. CSV numbers use %.17g and JSON uses
 * shortest-round-trip formatting, so doubles survive a save/load cycle
 * exactly (the round-trip re-certification test relies on this).
 */

#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lotsol/cli/config.hpp"
#include "lotsol/loop.hpp"
#include "lotsol/lp/compare.hpp"
#include "lotsol/models/taxation.hpp"
#include "lotsol/problem.hpp"
#include "lotsol/solution.hpp"

namespace lotsol::cli {

namespace detail {

/// Round-trip-exact fixed formatting for CSV cells.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory table
// ---------------------------------------------------------------------------

/**
 * Writes the iterate path as CSV: one row per (down-sampled) iteration with
 * the visited action, consumption profile, step size, dual value, and
 * worst-case constraint magnitudes. When the run logged pooled-constraint
 * values and the pooled multiplier vector is small, the pre-update
 * multiplier path is replayed into extra lambda columns (the projected
 * update is replayed bit-exactly from the logged subgradients, so no
 * per-iteration snapshots are needed).
 *
 * Rows are kept when (k - 1) % stride == 0, plus the final row.
 */
inline void write_trajectory_csv(std::ostream& os, const IterateLog& log,
                                 const std::string& hash, int stride = 1) {
  if (stride < 1) throw std::invalid_argument("trajectory stride must be >= 1 when writing");
  os << "# config_hash=" << hash << "\n";
  const std::size_t dim = log.records.empty() ? 0 : log.records.front().c.size();
  const std::size_t n_lambda = log.initial_multipliers.lambda.size();
  const bool with_lambda =
      !log.records.empty() && !log.records.front().g.empty() && n_lambda <= 8;

  os << "k,a_index";
  for (std::size_t r = 0; r < dim; ++r) os << ",c_" << r;
  os << ",mu,dual_value,max_abs_g,max_abs_h";
  if (with_lambda) {
    for (std::size_t i = 0; i < n_lambda; ++i) os << ",lambda_" << i;
  }
  os << "\n";

  Vec lambda = log.initial_multipliers.lambda;
  const int last_k = log.records.empty() ? 0 : log.records.back().k;
  for (const IterateRecord& rec : log.records) {
    const bool keep = (rec.k - 1) % stride == 0 || rec.k == last_k;
    if (keep) {
      os << rec.k << ',' << rec.a_index;
      for (double v : rec.c) os << ',' << detail::fmt(v);
      os << ',' << detail::fmt(rec.mu) << ',' << detail::fmt(rec.dual_value) << ','
         << detail::fmt(rec.max_abs_g) << ',' << detail::fmt(rec.max_abs_h);
      if (with_lambda) {
        for (double v : lambda) os << ',' << detail::fmt(v);
      }
      os << "\n";
    }
    if (with_lambda) {
      for (std::size_t i = 0; i < n_lambda; ++i) {
        const double next = lambda[i] + rec.mu * rec.g[i];
        lambda[i] = next > 0.0 ? next : 0.0;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Lottery + certificate documents
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json lottery_to_json(const LotterySolution& lottery,
                                              const LotteryProblem& problem,
                                              const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash(cfg);
  j["model"] = to_string(cfg.model);
  j["k_start"] = lottery.k_start;
  j["k_end"] = lottery.k_end;
  j["objective"] = lottery.objective;
  nlohmann::ordered_json atoms = nlohmann::ordered_json::array();
  for (const LotteryAtom& atom : lottery.atoms) {
    nlohmann::ordered_json row;
    row["a_index"] = atom.a_index;
    row["action"] = problem.actions[static_cast<std::size_t>(atom.a_index)];
    row["c"] = atom.c;
    row["probability"] = atom.probability;
    atoms.push_back(std::move(row));
  }
  j["atoms"] = std::move(atoms);
  return j;
}

/// Rebuilds the support and window of a serialized lottery; the certificate
/// is recomputed by the caller (certify_eps), never trusted from disk.
inline LotterySolution lottery_from_json(const nlohmann::json& j) {
  LotterySolution lottery;
  lottery.k_start = j.at("k_start").get<int>();
  lottery.k_end = j.at("k_end").get<int>();
  lottery.objective = j.at("objective").get<double>();
  for (const auto& row : j.at("atoms")) {
    LotteryAtom atom;
    atom.a_index = row.at("a_index").get<int>();
    atom.c = row.at("c").get<Vec>();
    atom.probability = row.at("probability").get<double>();
    lottery.atoms.push_back(std::move(atom));
  }
  return lottery;
}

inline nlohmann::ordered_json certificate_to_json(const EpsOptimalityReport& report,
                                                  const std::string& hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = hash;
  j["max_g_violation"] = report.max_g_violation;
  j["max_h_violation"] = report.max_h_violation;
  j["dual_upper_bound"] = report.dual_upper_bound;
  j["duality_gap_bound"] = report.duality_gap_bound;
  j["certified_eps"] = report.certified_eps;
  j["analytic_g_bounds"] = report.analytic_g_bounds;
  return j;
}

inline EpsOptimalityReport certificate_from_json(const nlohmann::json& j) {
  EpsOptimalityReport report;
  report.max_g_violation = j.at("max_g_violation").get<double>();
  report.max_h_violation = j.at("max_h_violation").get<double>();
  report.dual_upper_bound = j.at("dual_upper_bound").get<double>();
  report.duality_gap_bound = j.at("duality_gap_bound").get<double>();
  report.certified_eps = j.at("certified_eps").get<double>();
  report.analytic_g_bounds = j.at("analytic_g_bounds").get<Vec>();
  return report;
}

// ---------------------------------------------------------------------------
// Oracle comparison document
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json compare_to_json(const lp::CompareReport& report,
                                              const std::string& hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = hash;
  j["lp_optimum"] = report.lp_optimum;
  j["min_dual_value"] = report.min_dual_value;
  j["lottery_objective"] = report.lottery_objective;
  j["dual_gap"] = report.dual_gap;
  j["objective_gap"] = report.objective_gap;
  j["action_marginal_max_diff"] = report.action_marginal_max_diff;
  j["consumption_mean_max_diff"] = report.consumption_mean_max_diff;
  j["lp_action_marginal"] = report.lp_action_marginal;
  j["lottery_action_marginal"] = report.lottery_action_marginal;
  return j;
}

// ---------------------------------------------------------------------------
// Benchmark table
// ---------------------------------------------------------------------------

/// One row of the performance ladder. Wall-clock fields are the only
/// non-deterministic artifact contents the tools produce.
struct BenchmarkRow {
  double a_step = 0.0;
  int iterations = 0;
  double wall_seconds = 0.0;
  long lp_vars = 0;
  long lp_equalities = 0;
  long lp_inequalities = 0;
  std::size_t lp_nonzero_bound = 0;
  bool lp_under_cap = false;
  bool lp_solved = false;
  double lp_solve_seconds = 0.0;
  double lp_optimum = 0.0;
};

inline void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows,
                                const std::string& hash) {
  os << "# config_hash=" << hash << "\n";
  os << "a_step,iterations,wall_seconds,lp_vars,lp_equalities,lp_inequalities,"
        "lp_nonzero_bound,lp_under_cap,lp_solve_seconds,lp_optimum\n";
  for (const BenchmarkRow& row : rows) {
    os << detail::fmt(row.a_step) << ',' << row.iterations << ','
       << detail::fmt(row.wall_seconds) << ',' << row.lp_vars << ',' << row.lp_equalities << ','
       << row.lp_inequalities << ',' << row.lp_nonzero_bound << ','
       << (row.lp_under_cap ? "true" : "false") << ',';
    if (row.lp_solved) os << detail::fmt(row.lp_solve_seconds);
    os << ',';
    if (row.lp_solved) os << detail::fmt(row.lp_optimum);
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// Taxation reports
// ---------------------------------------------------------------------------

/**
 * Per-type marginal table: one row per (type, cluster) with the cluster's
 * probability and (c, y) center of mass, matching the layout of a
 * deterministic-versus-lottery comparison table. When a deterministic
 * benchmark allocation is supplied its (c, y) pair is repeated on each of
 * the type's rows; otherwise those cells stay empty.
 */
inline void write_tax_marginals_csv(std::ostream& os, const tax::TaxEconomy& econ,
                                    const LotterySolution& lottery, double cluster_tol,
                                    const std::string& hash,
                                    const tax::Allocation* benchmark = nullptr) {
  os << "# config_hash=" << hash << "\n";
  os << "type,w,eta,cluster,probability,c,y,benchmark_c,benchmark_y\n";
  const int H = econ.num_types();
  for (int h = 0; h < H; ++h) {
    const std::vector<tax::TypeAtom> atoms = tax::type_marginal(lottery, h, H, cluster_tol);
    for (std::size_t t = 0; t < atoms.size(); ++t) {
      os << h << ',' << detail::fmt(econ.types[static_cast<std::size_t>(h)].w) << ','
         << detail::fmt(econ.types[static_cast<std::size_t>(h)].eta) << ',' << t << ','
         << detail::fmt(atoms[t].probability) << ',' << detail::fmt(atoms[t].c) << ','
         << detail::fmt(atoms[t].y) << ',';
      if (benchmark) os << detail::fmt(benchmark->c[static_cast<std::size_t>(h)]);
      os << ',';
      if (benchmark) os << detail::fmt(benchmark->y[static_cast<std::size_t>(h)]);
      os << "\n";
    }
  }
}

inline nlohmann::ordered_json welfare_to_json(const tax::FirstBest& fb,
                                              const tax::WelfareAccount& account,
                                              const std::string& hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = hash;
  nlohmann::ordered_json first_best;
  first_best["gamma"] = fb.gamma;
  first_best["welfare"] = fb.welfare;
  first_best["consumption"] = fb.consumption;
  first_best["total_output"] = fb.total_output;
  first_best["y"] = fb.y;
  j["first_best"] = std::move(first_best);
  nlohmann::ordered_json lottery;
  lottery["welfare"] = account.u_lottery;
  lottery["compensating_resource_loss"] = account.m_lottery;
  lottery["waste_fraction"] = account.loss_lottery;
  j["lottery"] = std::move(lottery);
  nlohmann::ordered_json det;
  det["welfare"] = account.u_deterministic;
  det["compensating_resource_loss"] = account.m_deterministic;
  det["waste_fraction"] = account.loss_deterministic;
  j["deterministic_benchmark"] = std::move(det);
  return j;
}

}  // namespace lotsol::cli
