#pragma once

#include <utility>

#include "lotsol/problem.hpp"

namespace lotsol {

/// g_i(a, c) with finiteness check.
inline double pooled_value(const LotteryProblem& p, int i, int a_index, const Vec& c) {
  return detail::require_finite(p.pooled_constraints[i](a_index, c), "pooled constraint",
                                a_index, c);
}

/// Per-action constraint value h_j(a, c), unscaled.
inline double per_action_value(const LotteryProblem& p, int j, int a_index, const Vec& c) {
  return detail::require_finite(p.per_action_constraints[j](a_index, c),
                                "per-action constraint", a_index, c);
}

/// Evaluates all pooled and per-action constraints at one point.
inline void eval_constraints(const LotteryProblem& p, int a_index, const Vec& c, Vec& g_out,
                             Vec& h_out) {
  g_out.resize(p.num_pooled());
  h_out.resize(p.num_per_action());
  for (int i = 0; i < p.num_pooled(); ++i) g_out[i] = pooled_value(p, i, a_index, c);
  for (int j = 0; j < p.num_per_action(); ++j) h_out[j] = per_action_value(p, j, a_index, c);
}

/**
 * Lagrangian of the lottery problem at a single point:
 *
 *   L(a, c; lambda, gamma) = f(a, c) - sum_i lambda_i g_i(a, c)
 *                                    - sum_j gamma_{j,a} h_j(a, c)
 *
 * Only the gamma column of the evaluated action enters. Constraint scalers do
 * not appear here; they act on the gamma ascent step only (see
 * subgradient_step_in_place), which leaves the dual function and its minimum
 * unchanged while speeding up the multipliers of weakly-violated constraints.
 */
inline double eval_lagrangian(const LotteryProblem& p, int a_index, const Vec& c,
                              const MultiplierState& mult) {
  double acc = detail::require_finite(p.payoff(a_index, c), "payoff", a_index, c);
  for (int i = 0; i < p.num_pooled(); ++i) {
    acc -= mult.lambda[i] * pooled_value(p, i, a_index, c);
  }
  for (int j = 0; j < p.num_per_action(); ++j) {
    acc -= mult.gamma_at(j, a_index) * per_action_value(p, j, a_index, c);
  }
  return acc;
}

/**
 * Evaluates the dual function V(lambda, gamma) = max_{A x C} L and returns the
 * maximizer found by `inner`. Exactness is up to the inner solver's
 * resolution; ties are broken deterministically by the solver (lowest action
 * index, then lexicographically smallest consumption).
 */
template <class Inner>
InnerResult dual_value(const LotteryProblem& p, const MultiplierState& mult, Inner&& inner) {
  return inner(p, mult);
}

/**
 * Projected subgradient step at a reported argmax (a, c):
 *
 *   lambda_i <- max{lambda_i + mu g_i(a, c), 0}                for every i
 *   gamma_{j,a} <- max{gamma_{j,a} + mu s_{j,a} h_j(a, c), 0}  argmax action only
 *
 * where s_{j,a} is the problem's constraint scaler (1 when absent). Scalers
 * thus act as per-constraint ascent rates: a constraint whose raw violation
 * is structurally tiny can still move its multiplier at a useful speed. The
 * raw g and h values are supplied by the caller so one evaluation can be
 * shared between the update and the iterate log.
 */
inline void subgradient_step_in_place(const LotteryProblem& p, MultiplierState& mult, double mu,
                                      int a_index, const Vec& g_vals, const Vec& h_vals) {
  for (std::size_t i = 0; i < mult.lambda.size(); ++i) {
    const double next = mult.lambda[i] + mu * g_vals[i];
    mult.lambda[i] = next > 0.0 ? next : 0.0;
  }
  double* col = mult.gamma.data() + static_cast<std::size_t>(a_index) * mult.num_h;
  for (int j = 0; j < mult.num_h; ++j) {
    const double next = col[j] + mu * p.scaler(j, a_index) * h_vals[j];
    col[j] = next > 0.0 ? next : 0.0;
  }
}

/// Pure form of the projected step; evaluates the constraints itself.
inline MultiplierState subgradient_step(const LotteryProblem& p, const MultiplierState& mult,
                                        double mu, int a_index, const Vec& c) {
  Vec g, h;
  eval_constraints(p, a_index, c, g, h);
  MultiplierState next = mult;
  subgradient_step_in_place(p, next, mu, a_index, g, h);
  return next;
}

}  // namespace lotsol
