#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "lotsol/lagrangian.hpp"
#include "lotsol/problem.hpp"

namespace lotsol {

/**
 * Diminishing step rule mu^k = scale / (k + offset)^exponent.
 *
 * The exponent must lie in (0.5, 1] so that sum mu^k diverges while
 * sum (mu^k)^2 converges; the induced averaging-error decay rate is
 * rho = 2 * exponent - 1.
 */
struct StepSchedule {
  double scale = 1.0;
  double offset = 0.0;
  double exponent = 0.8;

  StepSchedule() = default;
  StepSchedule(double s, double k0, double p) : scale(s), offset(k0), exponent(p) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
      throw std::invalid_argument("step schedule: scale must be positive");
    }
    if (!(offset >= 0.0) || !std::isfinite(offset)) {
      throw std::invalid_argument("step schedule: offset must be nonnegative");
    }
    if (!(exponent > 0.5) || !(exponent <= 1.0)) {
      throw std::invalid_argument("step schedule: exponent must lie in (0.5, 1]");
    }
  }

  double mu(int k) const { return scale / std::pow(static_cast<double>(k) + offset, exponent); }
  double rho() const { return 2.0 * exponent - 1.0; }
};

/// One iteration of the loop. `g`/`h` are filled only when constraint-value
/// logging is enabled; `h` holds raw (unscaled) values.
struct IterateRecord {
  int k = 0;
  int a_index = 0;
  Vec c;
  double mu = 0.0;
  double dual_value = 0.0;
  double payoff = 0.0;
  double max_abs_g = 0.0;
  double max_abs_h = 0.0;
  Vec g;
  Vec h;
};

struct MultiplierSnapshot {
  int k = 0;               // iterate whose argmax this state produced
  MultiplierState state;   // pre-update state at iteration k
};

struct FeasibilitySample {
  int k = 0;
  double max_g_violation = 0.0;  // max_i of the full-history weighted g mean up to k
};

/// Running constants for the complexity bookkeeping: M bounds the observed
/// subgradient entries, and lambda_bar combines the largest multiplier seen
/// with the initial multiplier norm Lambda(lambda^1, gamma^1) = sum of squares.
struct RunningBounds {
  double max_abs_constraint = 0.0;   // M
  double max_multiplier_inf = 0.0;
  double initial_lambda_fn = 0.0;    // Lambda at the initial multipliers

  double lambda_bar() const { return max_multiplier_inf + initial_lambda_fn; }
};

struct IterateLog {
  std::vector<IterateRecord> records;
  std::vector<MultiplierSnapshot> multiplier_snapshots;
  std::vector<FeasibilitySample> feasibility_samples;
  RunningBounds running_bounds;
  MultiplierState initial_multipliers;
  MultiplierState final_multipliers;  // state after the last update (lambda^{N+1})
  StepSchedule schedule;
  Vec weighted_g_sum;                 // sum_k mu^k g_i(a^k, c^k), full history
  double sum_mu = 0.0;                // sum over all logged iterations
  int n_iters = 0;
};

struct LoopOptions {
  bool log_constraint_values = true;
  int multiplier_snapshot_stride = 0;   // 0 disables snapshots
  int feasibility_sample_stride = 100;  // 0 disables sampling
};

inline double sum_of_squares(const MultiplierState& m) {
  double acc = 0.0;
  for (double v : m.lambda) acc += v * v;
  for (double v : m.gamma) acc += v * v;
  return acc;
}

inline double inf_norm(const MultiplierState& m) {
  double acc = 0.0;
  for (double v : m.lambda) acc = std::max(acc, std::abs(v));
  for (double v : m.gamma) acc = std::max(acc, std::abs(v));
  return acc;
}

/**
 * Runs n_iters rounds of Lagrangian iteration from `init`:
 *
 *   1. (a^k, c^k) in argmax_{A x C} L(., .; lambda^k, gamma^k)   (inner solver)
 *   2. projected subgradient update of (lambda, gamma) with step mu^k
 *   3. every visited point is logged; the lottery is formed later from the
 *      step-weighted visit frequencies (construct_lottery).
 *
 * The inner solver is any callable (problem, multipliers) -> InnerResult.
 * Inner-solver exceptions are rethrown as SolverError carrying the failing k.
 * The run is deterministic: same inputs give a bit-identical log.
 */
template <class Inner>
IterateLog run_iteration_loop(const LotteryProblem& problem, const MultiplierState& init,
                              const StepSchedule& schedule, int n_iters, Inner&& inner,
                              const LoopOptions& opts = {}) {
  problem.validate();
  if (n_iters < 1) throw std::invalid_argument("run_iteration_loop: n_iters must be >= 1");
  if (!init.shaped_for(problem)) {
    throw std::invalid_argument("run_iteration_loop: multiplier state shape mismatch");
  }
  if (!init.all_nonnegative()) {
    throw std::invalid_argument("run_iteration_loop: initial multipliers must be nonnegative");
  }

  const int m = problem.num_pooled();
  const int ell = problem.num_per_action();

  IterateLog log;
  log.schedule = schedule;
  log.n_iters = n_iters;
  log.initial_multipliers = init;
  log.records.reserve(static_cast<std::size_t>(n_iters));
  log.weighted_g_sum.assign(static_cast<std::size_t>(m), 0.0);
  log.running_bounds.initial_lambda_fn = sum_of_squares(init);
  log.running_bounds.max_multiplier_inf = inf_norm(init);

  MultiplierState mult = init;
  Vec g_vals(static_cast<std::size_t>(m));
  Vec h_vals(static_cast<std::size_t>(ell));

  for (int k = 1; k <= n_iters; ++k) {
    const double mu = schedule.mu(k);

    if (opts.multiplier_snapshot_stride > 0 &&
        (k == 1 || (k - 1) % opts.multiplier_snapshot_stride == 0)) {
      log.multiplier_snapshots.push_back({k, mult});
    }

    InnerResult best;
    try {
      best = inner(problem, mult);
    } catch (const std::exception& e) {
      throw SolverError(k, e.what());
    }

    eval_constraints(problem, best.a_index, best.c, g_vals, h_vals);
    const double payoff =
        detail::require_finite(problem.payoff(best.a_index, best.c), "payoff", best.a_index,
                               best.c);

    IterateRecord rec;
    rec.k = k;
    rec.a_index = best.a_index;
    rec.c = std::move(best.c);
    rec.mu = mu;
    rec.dual_value = best.value;
    rec.payoff = payoff;
    for (int i = 0; i < m; ++i) {
      rec.max_abs_g = std::max(rec.max_abs_g, std::abs(g_vals[i]));
      log.weighted_g_sum[i] += mu * g_vals[i];
    }
    for (int j = 0; j < ell; ++j) rec.max_abs_h = std::max(rec.max_abs_h, std::abs(h_vals[j]));
    log.running_bounds.max_abs_constraint =
        std::max({log.running_bounds.max_abs_constraint, rec.max_abs_g, rec.max_abs_h});
    if (opts.log_constraint_values) {
      rec.g = g_vals;
      rec.h = h_vals;
    }
    log.sum_mu += mu;

    subgradient_step_in_place(problem, mult, mu, rec.a_index, g_vals, h_vals);
    // Projection invariant: every touched multiplier is clamped at zero, and
    // untouched entries are unchanged, so the whole state stays nonnegative.
    for (double v : mult.lambda) {
      if (!(v >= 0.0)) throw SolverError(k, "projection produced a negative multiplier");
    }
    for (int j = 0; j < ell; ++j) {
      if (!(mult.gamma_at(j, rec.a_index) >= 0.0)) {
        throw SolverError(k, "projection produced a negative multiplier");
      }
    }
    // Running max over all states visited: entries the update left untouched
    // are already covered by the previous iteration's max, so only the lambda
    // block and the updated gamma row need scanning.
    double touched_inf = 0.0;
    for (double v : mult.lambda) touched_inf = std::max(touched_inf, std::abs(v));
    for (int j = 0; j < ell; ++j) {
      touched_inf = std::max(touched_inf, std::abs(mult.gamma_at(j, rec.a_index)));
    }
    log.running_bounds.max_multiplier_inf =
        std::max(log.running_bounds.max_multiplier_inf, touched_inf);

    if (opts.feasibility_sample_stride > 0 && k % opts.feasibility_sample_stride == 0) {
      double worst = m > 0 ? log.weighted_g_sum[0] / log.sum_mu : 0.0;
      for (int i = 1; i < m; ++i) worst = std::max(worst, log.weighted_g_sum[i] / log.sum_mu);
      log.feasibility_samples.push_back({k, worst});
    }

    log.records.push_back(std::move(rec));
  }

  log.final_multipliers = std::move(mult);
  return log;
}

}  // namespace lotsol
