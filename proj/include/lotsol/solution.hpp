#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "lotsol/lagrangian.hpp"
#include "lotsol/loop.hpp"
#include "lotsol/problem.hpp"

namespace lotsol {

struct LotteryAtom {
  int a_index = 0;
  Vec c;
  double probability = 0.0;
};

/**
 * Epsilon-optimality certificate for a reported lottery.
 *
 * max_g_violation is the largest expected pooled-constraint value over the
 * atoms. max_h_violation is the largest conditional per-action expectation;
 * actions carrying no mass report zero. dual_upper_bound is min_k V over the
 * whole logged run, duality_gap_bound = dual_upper_bound - objective, and
 * certified_eps = max of the three. When the lottery spans the full history,
 * analytic_g_bounds carries the telescoping feasibility bound
 * (lambda_i^{N+1} - lambda_i^1) / sum_k mu^k per pooled constraint.
 */
struct EpsOptimalityReport {
  double max_g_violation = 0.0;
  double max_h_violation = 0.0;
  double dual_upper_bound = 0.0;
  double duality_gap_bound = 0.0;
  double certified_eps = 0.0;
  Vec analytic_g_bounds;
};

struct LotterySolution {
  std::vector<LotteryAtom> atoms;
  int k_start = 0;
  int k_end = 0;
  double objective = 0.0;  // step-weighted expected payoff over the window
  std::optional<EpsOptimalityReport> eps_report;
};

/// Default reporting window: the final 5% of a run (at least one iterate).
inline std::pair<int, int> tail_window(const IterateLog& log, double fraction = 0.05) {
  const int n = log.n_iters;
  int len = static_cast<int>(std::lround(fraction * n));
  len = std::max(len, 1);
  return {std::max(1, n - len), n};
}

namespace detail {

inline bool within_max_norm(const Vec& a, const Vec& b, double tol) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    if (!(std::abs(a[r] - b[r]) < tol)) return false;
  }
  return true;
}

inline bool lex_less(const Vec& a, const Vec& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

/**
 * Builds the lottery x^N = (1 / sum_k mu^k) sum_k mu^k delta_{(a^k, c^k)}
 * over the window [k_start, k_end] (1-based, inclusive). Atoms sharing an
 * action whose consumption vectors differ by less than cluster_tol in
 * max-norm are merged into their probability-weighted mean; merging is
 * greedy in iteration order against the running cluster means, so the result
 * is deterministic. cluster_tol <= 0 disables merging. Atoms are returned
 * sorted by descending probability (ties: action index, then lexicographic
 * consumption). The objective is the step-weighted mean payoff of the raw
 * window iterates, which merging does not alter.
 */
inline LotterySolution construct_lottery(const IterateLog& log, int k_start, int k_end,
                                         double cluster_tol = 1e-2) {
  if (log.records.empty()) throw std::invalid_argument("construct_lottery: empty log");
  if (k_start < 1 || k_end > log.n_iters || k_start > k_end) {
    throw std::invalid_argument("construct_lottery: window [" + std::to_string(k_start) + ", " +
                                std::to_string(k_end) + "] out of range for " +
                                std::to_string(log.n_iters) + " iterations");
  }

  struct Cluster {
    int a_index;
    Vec mean;
    double weight;
  };
  std::vector<Cluster> clusters;
  std::map<int, std::vector<std::size_t>> by_action;

  double total_weight = 0.0;
  double weighted_payoff = 0.0;

  for (int k = k_start; k <= k_end; ++k) {
    const IterateRecord& rec = log.records[static_cast<std::size_t>(k - 1)];
    total_weight += rec.mu;
    weighted_payoff += rec.mu * rec.payoff;

    bool merged = false;
    if (cluster_tol > 0.0) {
      for (std::size_t idx : by_action[rec.a_index]) {
        Cluster& cl = clusters[idx];
        if (detail::within_max_norm(cl.mean, rec.c, cluster_tol)) {
          const double w = cl.weight + rec.mu;
          for (std::size_t r = 0; r < cl.mean.size(); ++r) {
            cl.mean[r] = (cl.weight * cl.mean[r] + rec.mu * rec.c[r]) / w;
          }
          cl.weight = w;
          merged = true;
          break;
        }
      }
    }
    if (!merged) {
      by_action[rec.a_index].push_back(clusters.size());
      clusters.push_back({rec.a_index, rec.c, rec.mu});
    }
  }

  LotterySolution out;
  out.k_start = k_start;
  out.k_end = k_end;
  out.objective = weighted_payoff / total_weight;
  out.atoms.reserve(clusters.size());
  for (const Cluster& cl : clusters) {
    out.atoms.push_back({cl.a_index, cl.mean, cl.weight / total_weight});
  }
  std::sort(out.atoms.begin(), out.atoms.end(), [](const LotteryAtom& x, const LotteryAtom& y) {
    if (x.probability != y.probability) return x.probability > y.probability;
    if (x.a_index != y.a_index) return x.a_index < y.a_index;
    return detail::lex_less(x.c, y.c);
  });
  return out;
}

/**
 * Certifies a lottery against Definition-3 style epsilon-optimality:
 * expected pooled violations, conditional per-action violations, and the
 * duality gap against the best dual value seen along the run. All constraint
 * values are re-evaluated from the problem at the atom points. Weak duality makes duality_gap_bound nonnegative up to the
 * measured infeasibility of the lottery.
 */
inline EpsOptimalityReport certify_eps(const LotteryProblem& problem,
                                       const LotterySolution& lottery, const IterateLog& log) {
  const int m = problem.num_pooled();
  const int ell = problem.num_per_action();

  EpsOptimalityReport rep;

  Vec g_acc(static_cast<std::size_t>(m), 0.0);
  std::map<int, std::pair<double, Vec>> per_action;  // a_index -> (mass, sum prob * h_j)
  for (const LotteryAtom& atom : lottery.atoms) {
    for (int i = 0; i < m; ++i) {
      g_acc[i] += atom.probability * pooled_value(problem, i, atom.a_index, atom.c);
    }
    auto& slot = per_action[atom.a_index];
    if (slot.second.empty()) slot.second.assign(static_cast<std::size_t>(ell), 0.0);
    slot.first += atom.probability;
    for (int j = 0; j < ell; ++j) {
      slot.second[j] += atom.probability * per_action_value(problem, j, atom.a_index, atom.c);
    }
  }

  double max_g = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) max_g = std::max(max_g, g_acc[i]);
  if (m == 0) max_g = 0.0;
  rep.max_g_violation = max_g;

  // Conditional per-action expectations; actions without mass report zero,
  // so the maximum is taken over those zeros as well.
  double max_h = 0.0;
  if (ell > 0) {
    const bool all_actions_covered =
        static_cast<int>(per_action.size()) == problem.num_actions();
    max_h = all_actions_covered ? -std::numeric_limits<double>::infinity() : 0.0;
    for (const auto& [a_index, slot] : per_action) {
      for (int j = 0; j < ell; ++j) max_h = std::max(max_h, slot.second[j] / slot.first);
    }
  }
  rep.max_h_violation = max_h;

  double best_dual = std::numeric_limits<double>::infinity();
  for (const IterateRecord& rec : log.records) best_dual = std::min(best_dual, rec.dual_value);
  rep.dual_upper_bound = best_dual;
  rep.duality_gap_bound = best_dual - lottery.objective;
  rep.certified_eps =
      std::max({rep.max_g_violation, rep.max_h_violation, rep.duality_gap_bound});

  if (lottery.k_start == 1 && lottery.k_end == log.n_iters) {
    rep.analytic_g_bounds.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      rep.analytic_g_bounds[i] =
          (log.final_multipliers.lambda[i] - log.initial_multipliers.lambda[i]) / log.sum_mu;
    }
  }
  return rep;
}

}  // namespace lotsol
