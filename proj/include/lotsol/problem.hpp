#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lotsol {

using Vec = std::vector<double>;

/// Closed interval for one consumption coordinate.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// A problem callback returned a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

/// The dual objective has no finite ascent direction at the queried
/// multipliers: every pooled multiplier is zero while some coordinate still
/// has a positive payoff coefficient. Callers should raise the pooled
/// multipliers and retry.
class DualUnboundedDirection : public std::runtime_error {
 public:
  explicit DualUnboundedDirection(const std::string& what) : std::runtime_error(what) {}
};

/// Iteration-loop failure; carries the 1-based iteration that failed.
class SolverError : public std::runtime_error {
 public:
  SolverError(int iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

namespace detail {

inline std::string point_to_string(int a_index, const Vec& c) {
  std::ostringstream os;
  os << "(a_index=" << a_index << ", c=[";
  for (std::size_t r = 0; r < c.size(); ++r) {
    if (r > 0) os << ", ";
    os << c[r];
  }
  os << "])";
  return os.str();
}

inline double require_finite(double v, const char* what, int a_index, const Vec& c) {
  if (!std::isfinite(v)) {
    throw EvaluationError(std::string(what) + " returned non-finite value at " +
                          point_to_string(a_index, c));
  }
  return v;
}

}  // namespace detail

/**
 * A planning problem over lotteries on A x C.
 *
 * A is a finite list of action points, C a box of consumption vectors.
 * The deterministic problem is
 *
 *     max f(a, c)   s.t.  g_i(a, c) <= 0  (pooled, i = 1..m)
 *                         h_j(a, c) <= 0  (per action, j = 1..l)
 *
 * and the lottery problem asks the same of a probability measure on A x C,
 * with the pooled constraints holding in expectation and the per-action
 * constraints holding on every action slice. `constraint_scalers` optionally
 * attaches a positive ascent-rate weight to each (j, a) pair; the weight
 * modulates only the multiplier update step. Constraint values, Lagrangian
 * evaluation, logs, and certificates always see raw h.
 */
struct LotteryProblem {
  using Callback = std::function<double(int a_index, const Vec& c)>;

  std::vector<Vec> actions;            // finite action set, one point per entry
  std::vector<Interval> consumption_box;
  Callback payoff;                     // f
  std::vector<Callback> pooled_constraints;      // g_i
  std::vector<Callback> per_action_constraints;  // h_j
  Vec constraint_scalers;              // l x |A| action-major; empty = all ones

  int num_actions() const { return static_cast<int>(actions.size()); }
  int num_pooled() const { return static_cast<int>(pooled_constraints.size()); }
  int num_per_action() const { return static_cast<int>(per_action_constraints.size()); }
  int dim() const { return static_cast<int>(consumption_box.size()); }

  double scaler(int j, int a_index) const {
    if (constraint_scalers.empty()) return 1.0;
    return constraint_scalers[static_cast<std::size_t>(a_index) * num_per_action() + j];
  }

  void validate() const {
    if (actions.empty()) throw std::invalid_argument("problem: action set is empty");
    if (consumption_box.empty()) throw std::invalid_argument("problem: consumption box is empty");
    for (const auto& iv : consumption_box) {
      // hi may be +infinity (unbounded-above coordinate); lo must be finite.
      if (!(iv.lo <= iv.hi) || !std::isfinite(iv.lo) || std::isnan(iv.hi)) {
        throw std::invalid_argument("problem: malformed consumption interval");
      }
    }
    for (const auto& a : actions) {
      if (a.size() != actions.front().size()) {
        throw std::invalid_argument("problem: action points have mixed dimensions");
      }
    }
    for (std::size_t i = 0; i < actions.size(); ++i) {
      for (std::size_t k = i + 1; k < actions.size(); ++k) {
        if (actions[i] == actions[k]) {
          throw std::invalid_argument("problem: duplicate action point at indices " +
                                      std::to_string(i) + " and " + std::to_string(k));
        }
      }
    }
    if (!payoff) throw std::invalid_argument("problem: payoff callback is empty");
    if (!constraint_scalers.empty()) {
      const std::size_t want =
          static_cast<std::size_t>(num_per_action()) * static_cast<std::size_t>(num_actions());
      if (constraint_scalers.size() != want) {
        throw std::invalid_argument("problem: constraint_scalers has wrong size");
      }
      for (double s : constraint_scalers) {
        if (!(s > 0.0) || !std::isfinite(s)) {
          throw std::invalid_argument("problem: constraint scalers must be positive finite");
        }
      }
    }
  }
};

/**
 * Dual iterate: one multiplier per pooled constraint and one per
 * (per-action constraint, action) pair. Gamma is stored action-major, so the
 * column touched by a multiplier update (all j for one action) is contiguous.
 */
struct MultiplierState {
  Vec lambda;       // m entries
  Vec gamma;        // l x |A| entries, index (j, a) -> a * num_h + j
  int num_h = 0;
  int num_actions = 0;

  static MultiplierState zeros(int m, int ell, int n_actions) {
    MultiplierState s;
    s.lambda.assign(static_cast<std::size_t>(m), 0.0);
    s.gamma.assign(static_cast<std::size_t>(ell) * static_cast<std::size_t>(n_actions), 0.0);
    s.num_h = ell;
    s.num_actions = n_actions;
    return s;
  }

  double& gamma_at(int j, int a_index) {
    return gamma[static_cast<std::size_t>(a_index) * num_h + j];
  }
  double gamma_at(int j, int a_index) const {
    return gamma[static_cast<std::size_t>(a_index) * num_h + j];
  }

  bool all_nonnegative() const {
    for (double v : lambda)
      if (!(v >= 0.0)) return false;
    for (double v : gamma)
      if (!(v >= 0.0)) return false;
    return true;
  }

  bool shaped_for(const LotteryProblem& p) const {
    return static_cast<int>(lambda.size()) == p.num_pooled() && num_h == p.num_per_action() &&
           num_actions == p.num_actions() &&
           gamma.size() == static_cast<std::size_t>(p.num_per_action()) *
                               static_cast<std::size_t>(p.num_actions());
  }
};

/// Inner-solver result: the maximizing point of the Lagrangian and its value.
struct InnerResult {
  int a_index = 0;
  Vec c;
  double value = 0.0;
};

}  // namespace lotsol
