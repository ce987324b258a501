#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lotsol/lp/moral_hazard_lp.hpp"
#include "lotsol/lp/simplex.hpp"
#include "lotsol/loop.hpp"
#include "lotsol/solution.hpp"

namespace lotsol::lp {

/**
 * Side-by-side report for the two routes to the same randomized optimum: the
 * exact discretized linear program and the dual iteration with its
 * reconstructed lottery.
 */
struct CompareReport {
  double lp_optimum = 0.0;
  double min_dual_value = 0.0;      // tightest upper bound seen along the run
  double lottery_objective = 0.0;   // payoff expectation under the lottery
  double dual_gap = 0.0;            // |lp_optimum - min_dual_value|
  double objective_gap = 0.0;       // |lp_optimum - lottery_objective|
  double action_marginal_max_diff = 0.0;
  // Max over actions carrying mass on both sides of the largest difference in
  // mean consumption conditional on the action (max over output states).
  double consumption_mean_max_diff = 0.0;
  std::vector<double> lp_action_marginal;
  std::vector<double> lottery_action_marginal;
};

/**
 * Builds the comparison report. The lottery's action marginal is aggregated
 * onto the LP's action grid by index (both sides enumerate actions in the
 * same order). The dual sequence must come from the same model so that the
 * weak-duality invariant min_k V^k >= LP optimum (within tolerance) holds.
 */
inline CompareReport compare_oracle(const MhLp& built, const SimplexResult& lp_result,
                                    const IterateLog& log, const LotterySolution& lottery) {
  if (lp_result.status != SimplexStatus::Optimal) {
    throw std::runtime_error("compare: the linear program did not reach an optimum");
  }
  if (log.records.empty()) throw std::runtime_error("compare: empty iterate log");

  CompareReport rep;
  rep.lp_optimum = lp_result.objective;
  rep.min_dual_value = std::numeric_limits<double>::infinity();
  for (const auto& rec : log.records) rep.min_dual_value = std::min(rep.min_dual_value, rec.dual_value);
  rep.lottery_objective = lottery.objective;
  rep.dual_gap = std::abs(rep.lp_optimum - rep.min_dual_value);
  rep.objective_gap = std::abs(rep.lp_optimum - rep.lottery_objective);

  const std::size_t na = built.actions.size();
  rep.lp_action_marginal = mh_lp_action_marginal(built, lp_result.x);
  rep.lottery_action_marginal.assign(na, 0.0);
  for (const auto& atom : lottery.atoms) {
    if (atom.a_index < 0 || static_cast<std::size_t>(atom.a_index) >= na) {
      throw std::runtime_error("compare: lottery atom outside the LP action grid");
    }
    rep.lottery_action_marginal[static_cast<std::size_t>(atom.a_index)] += atom.probability;
  }
  for (std::size_t a = 0; a < na; ++a) {
    rep.action_marginal_max_diff =
        std::max(rep.action_marginal_max_diff,
                 std::abs(rep.lp_action_marginal[a] - rep.lottery_action_marginal[a]));
  }

  // Conditional consumption means, compared only where both sides put mass.
  const auto lp_means = mh_lp_consumption_means(built, lp_result.x);
  const std::size_t nq = built.model.outputs.size();
  const double mass_floor = 1e-6;
  std::vector<double> lot_mean(na * nq, 0.0);
  std::vector<double> lot_mass(na, 0.0);
  for (const auto& atom : lottery.atoms) {
    const auto a = static_cast<std::size_t>(atom.a_index);
    lot_mass[a] += atom.probability;
    for (std::size_t q = 0; q < nq; ++q) lot_mean[a * nq + q] += atom.probability * atom.c[q];
  }
  for (std::size_t a = 0; a < na; ++a) {
    if (lot_mass[a] <= mass_floor || rep.lp_action_marginal[a] <= mass_floor) continue;
    for (std::size_t q = 0; q < nq; ++q) {
      const double lp_m = lp_means[a][q];
      if (!std::isfinite(lp_m)) continue;
      const double lo_m = lot_mean[a * nq + q] / lot_mass[a];
      rep.consumption_mean_max_diff =
          std::max(rep.consumption_mean_max_diff, std::abs(lp_m - lo_m));
    }
  }
  return rep;
}

}  // namespace lotsol::lp
