#pragma once

#include <cmath>
#include <memory>
#include <utility>

#include "lotsol/loop.hpp"
#include "lotsol/problem.hpp"
#include "lotsol/solution.hpp"
#include "lotsol/solvers/separable.hpp"

namespace lotsol::mh {

/**
 * Unobserved-action insurance economy. The agent picks an effort level a from
 * a uniform grid, output q is drawn from p(q | a), and the planner assigns
 * output-contingent consumption c(q) inside [c_min, c_max]. Utility is
 * u(c, a) = c^alpha + kappa (a_bar - a)^beta. The planner maximizes expected
 * agent utility subject to expected resource balance (pooled) and one
 * incentive constraint per deviation action (per-action): recommending a must
 * beat every deviation a' given the same consumption schedule.
 *
 * With ic_scaling on, each incentive constraint is divided by |a - a'|^2;
 * nearby deviations are nearly satisfied automatically, and the rescaling
 * keeps their multipliers on a common footing without changing the feasible
 * set.
 */
struct MoralHazardModel {
  double a_lo = 0.05;
  double a_step = 0.025;
  double a_hi = 1.95;
  Vec outputs{0.5, 1.5};
  double c_min = 0.0;
  double c_max = 2.0;
  double alpha = 0.5;   // consumption utility c^alpha
  double kappa = 0.8;   // leisure utility kappa * (a_bar - a)^beta
  double a_bar = 2.0;
  double beta = 0.5;
  bool ic_scaling = true;

  /// Actions are a_lo, a_lo + a_step, ... up to the largest value not above
  /// a_hi (colon-range semantics), so a_hi itself is hit only when a_step
  /// divides the span.
  int num_actions() const {
    if (!(a_step > 0.0)) throw std::invalid_argument("moral hazard: a_step must be positive");
    const int n = static_cast<int>(std::floor((a_hi - a_lo) / a_step + 1e-9)) + 1;
    if (n < 1) throw std::invalid_argument("moral hazard: empty action range");
    return n;
  }

  Vec action_values() const {
    const int n = num_actions();
    Vec a(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = a_lo + i * a_step;
    return a;
  }

  double v(double c) const { return alpha == 0.5 ? std::sqrt(c) : std::pow(c, alpha); }
  double v_prime(double c) const { return alpha * std::pow(c, alpha - 1.0); }
  double v_prime_inverse(double x) const { return std::pow(x / alpha, 1.0 / (alpha - 1.0)); }
  double leisure(double a) const { return kappa * std::pow(a_bar - a, beta); }

  void validate() const {
    if (outputs.size() != 2 || !(outputs[0] < outputs[1])) {
      throw std::invalid_argument("moral hazard: exactly two ordered outputs supported");
    }
    if (!(a_lo > 0.0 && a_hi < a_bar && a_lo < a_hi)) {
      throw std::invalid_argument("moral hazard: action range must lie in (0, a_bar)");
    }
    if (!(c_min >= 0.0 && c_min < c_max)) {
      throw std::invalid_argument("moral hazard: consumption bounds out of order");
    }
    if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta <= 1.0) || !(kappa >= 0.0)) {
      throw std::invalid_argument("moral hazard: utility parameters out of range");
    }
    (void)num_actions();
  }
};

/// P(q = high | a): below a = 1 the odds rise as 1 - (1 - a)^0.2, above as
/// 1 + (a - 1)^0.2, both halved; continuous at a = 1 with value 1/2.
inline double high_output_probability(double a) {
  return a < 1.0 ? 0.5 * (1.0 - std::pow(1.0 - a, 0.2)) : 0.5 * (1.0 + std::pow(a - 1.0, 0.2));
}

/// Rows indexed by action, columns by output; each row is a distribution.
inline std::vector<Vec> build_prob_table(const MoralHazardModel& model) {
  model.validate();
  const Vec actions = model.action_values();
  std::vector<Vec> table(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const double ph = high_output_probability(actions[i]);
    if (!(ph >= 0.0 && ph <= 1.0)) {
      throw std::invalid_argument("moral hazard: probability outside [0, 1]");
    }
    table[i] = {1.0 - ph, ph};
  }
  return table;
}

/// Deviation target of the j-th incentive constraint at action index a:
/// the action grid with the self-deviation removed.
inline int deviation_index(int j, int a_index) { return j < a_index ? j : j + 1; }

namespace detail {

/// Immutable tables shared by every callback of one lowered model.
struct MhData {
  MoralHazardModel model;
  Vec actions;
  std::vector<Vec> prob;  // p(q | a) rows
  Vec leisure;            // kappa (a_bar - a)^beta by action index
};

}  // namespace detail

struct MhProblem {
  LotteryProblem problem;
  SeparableSpec spec;
  std::shared_ptr<const detail::MhData> data;

  const MoralHazardModel& model() const { return data->model; }
  const Vec& actions() const { return data->actions; }
  const std::vector<Vec>& prob() const { return data->prob; }
};

/**
 * Lowers the model onto the lottery-problem interface: one pooled resource
 * constraint, |A| - 1 per-action incentive constraints (the self-deviation
 * row is identically zero and dropped), and the matching separable
 * coefficient spec for the first-order inner solver.
 */
inline MhProblem to_problem(const MoralHazardModel& model) {
  model.validate();
  auto data = std::make_shared<detail::MhData>();
  data->model = model;
  data->actions = model.action_values();
  data->prob = build_prob_table(model);
  data->leisure.resize(data->actions.size());
  for (std::size_t i = 0; i < data->actions.size(); ++i) {
    data->leisure[i] = model.leisure(data->actions[i]);
  }
  std::shared_ptr<const detail::MhData> d = data;

  const int na = static_cast<int>(d->actions.size());
  const int ell = na - 1;
  const int nq = static_cast<int>(model.outputs.size());

  LotteryProblem p;
  p.actions.resize(static_cast<std::size_t>(na));
  for (int i = 0; i < na; ++i) p.actions[static_cast<std::size_t>(i)] = {d->actions[i]};
  p.consumption_box.assign(static_cast<std::size_t>(nq), Interval{model.c_min, model.c_max});

  p.payoff = [d](int a, const Vec& c) {
    double acc = d->leisure[static_cast<std::size_t>(a)];
    const Vec& row = d->prob[static_cast<std::size_t>(a)];
    for (std::size_t r = 0; r < c.size(); ++r) acc += row[r] * d->model.v(c[r]);
    return acc;
  };
  p.pooled_constraints.push_back([d](int a, const Vec& c) {
    const Vec& row = d->prob[static_cast<std::size_t>(a)];
    double acc = 0.0;
    for (std::size_t r = 0; r < c.size(); ++r) {
      acc += row[r] * (c[r] - d->model.outputs[r]);
    }
    return acc;
  });
  for (int j = 0; j < ell; ++j) {
    p.per_action_constraints.push_back([d, j](int a, const Vec& c) {
      const int dev = deviation_index(j, a);
      const Vec& pa = d->prob[static_cast<std::size_t>(a)];
      const Vec& pd = d->prob[static_cast<std::size_t>(dev)];
      double acc = d->leisure[static_cast<std::size_t>(dev)] -
                   d->leisure[static_cast<std::size_t>(a)];
      for (std::size_t r = 0; r < c.size(); ++r) {
        acc += (pd[r] - pa[r]) * d->model.v(c[r]);
      }
      return acc;
    });
  }
  if (model.ic_scaling) {
    p.constraint_scalers.resize(static_cast<std::size_t>(na) * ell);
    for (int a = 0; a < na; ++a) {
      for (int j = 0; j < ell; ++j) {
        const double gap = d->actions[static_cast<std::size_t>(a)] -
                           d->actions[static_cast<std::size_t>(deviation_index(j, a))];
        p.constraint_scalers[static_cast<std::size_t>(a) * ell + j] = 1.0 / (gap * gap);
      }
    }
  }

  SeparableSpec spec;
  spec.u0 = [d](int a) { return d->leisure[static_cast<std::size_t>(a)]; };
  spec.u_coef = [d](int a, int r) {
    return d->prob[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)];
  };
  ConcaveCoordinateUtility w{
      [d](double c) { return d->model.v(c); },
      [d](double c) { return d->model.v_prime(c); },
      [d](double x) { return d->model.v_prime_inverse(x); },
  };
  spec.w.assign(static_cast<std::size_t>(nq), w);
  spec.v0 = [d](int j, int a) {
    const int dev = deviation_index(j, a);
    return d->leisure[static_cast<std::size_t>(dev)] - d->leisure[static_cast<std::size_t>(a)];
  };
  spec.v_coef = [d](int j, int a, int r) {
    const int dev = deviation_index(j, a);
    return d->prob[static_cast<std::size_t>(dev)][static_cast<std::size_t>(r)] -
           d->prob[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)];
  };
  spec.linear_g = true;
  spec.g_slope = [d](int /*i*/, int a, int r) {
    return d->prob[static_cast<std::size_t>(a)][static_cast<std::size_t>(r)];
  };

  MhProblem out;
  out.problem = std::move(p);
  out.spec = std::move(spec);
  out.data = std::move(d);
  return out;
}

struct MhSolveResult {
  IterateLog log;
  LotterySolution lottery;
};

/// Canonical step rule for this model: mu^k = (k + 1/a_step^2)^(-0.8).
inline StepSchedule default_schedule(const MoralHazardModel& model) {
  return StepSchedule(1.0, 1.0 / (model.a_step * model.a_step), 0.8);
}

inline int default_iterations(const MoralHazardModel& model) {
  return static_cast<int>(std::lround(100.0 / model.a_step));
}

/// Resource multiplier starts at 0.5, every incentive multiplier at zero.
inline MultiplierState initial_multipliers(const MhProblem& mh, double resource_lambda = 0.5) {
  MultiplierState init = MultiplierState::zeros(
      mh.problem.num_pooled(), mh.problem.num_per_action(), mh.problem.num_actions());
  init.lambda[0] = resource_lambda;
  return init;
}

/**
 * Runs the iteration with the first-order inner solver and reports the
 * windowed lottery. n_iters <= 0 picks 100 / a_step; a zero window picks the
 * final 5% of the run; cluster_tol follows construct_lottery.
 */
inline MhSolveResult solve(const MhProblem& mh, int n_iters = 0,
                           std::pair<int, int> window = {0, 0}, double cluster_tol = 1e-2,
                           const LoopOptions& opts = {}) {
  const int n = n_iters > 0 ? n_iters : default_iterations(mh.model());
  FocInnerSolver inner(mh.problem, mh.spec);
  IterateLog log = run_iteration_loop(mh.problem, initial_multipliers(mh),
                                      default_schedule(mh.model()), n, inner, opts);
  if (window.first <= 0 || window.second <= 0) {
    window = {n - static_cast<int>(std::lround(0.05 * n)), n};
    window.first = std::max(window.first, 1);
  }
  LotterySolution lot = construct_lottery(log, window.first, window.second, cluster_tol);
  lot.eps_report = certify_eps(mh.problem, lot, log);
  return {std::move(log), std::move(lot)};
}

inline MhSolveResult solve_example1(int n_iters = 0, std::pair<int, int> window = {0, 0}) {
  return solve(to_problem(MoralHazardModel{}), n_iters, window);
}

}  // namespace lotsol::mh
