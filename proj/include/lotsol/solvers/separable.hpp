#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "lotsol/lagrangian.hpp"
#include "lotsol/problem.hpp"

namespace lotsol {

/// Coordinate utility w_r: strictly increasing and concave on the coordinate
/// interval, with its derivative and the inverse of the derivative.
struct ConcaveCoordinateUtility {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
  std::function<double(double)> derivative_inverse;
};

/**
 * Coefficient description of a separable problem:
 *
 *   f(a, c)   = u_0(a) + sum_r u_r(a) w_r(c_r)
 *   h_j(a, c) = v_{j,0}(a) + sum_r v_{j,r}(a) w_r(c_r)
 *   g_i(a, c) = affine in c with slope_{i,r}(a) when linear_g, otherwise
 *               additively separable with partial derivative g_partial.
 *
 * The v coefficients describe the raw h constraints; the owning problem's
 * constraint scalers play no role here (they only modulate the multiplier
 * ascent, not the Lagrangian).
 */
struct SeparableSpec {
  std::function<double(int a)> u0;
  std::function<double(int a, int r)> u_coef;
  std::vector<ConcaveCoordinateUtility> w;
  std::function<double(int j, int a)> v0;
  std::function<double(int j, int a, int r)> v_coef;
  bool linear_g = true;
  std::function<double(int i, int a, int r)> g_slope;                 // linear branch
  std::function<double(int i, int a, int r, double c_r)> g_partial;   // fallback branch
};

/**
 * First-order-condition inner solver for separable problems.
 *
 * For each action the payoff coefficient of coordinate r under multipliers
 * (lambda, gamma) is
 *
 *   A(a, r) = u_r(a) - sum_j gamma_{j,a} s_{j,a} v_{j,r}(a)
 *
 * and with g affine the resource price is B(a, r) = sum_i lambda_i
 * slope_{i,r}(a). If A <= 0 the coordinate sits at its lower bound; otherwise
 * c_r = clip((w_r')^{-1}(B / A)) into the coordinate interval, with B <= 0
 * riding to the upper bound. The action argmax is then taken over the exact
 * per-action optima. When A(a, r) > 0 pulls a coordinate toward an infinite
 * upper bound (in particular when every pooled multiplier is zero), the dual
 * value is genuinely unbounded and DualUnboundedDirection is thrown; callers
 * should increase lambda. With a finite box the coordinate just rides to its
 * upper bound and the value stays finite.
 *
 * When linear_g is false, each coordinate's stationarity condition
 * A w_r'(c) = sum_i lambda_i dg_i/dc_r(c) is solved by bisection on the
 * monotone residual (tolerance 1e-10, 200 iterations).
 *
 * Construction materializes the coefficient callbacks into flat tables, so
 * the per-iteration cost is a handful of fused array sweeps.
 *
 * The gamma-weighted coefficient sums are memoized per action: a call first
 * compares each action's multiplier row against the row it last summed and
 * recomputes only the rows that changed (the iteration loop touches a single
 * action's row per update, so steady-state calls rescan na*ell doubles but
 * redo only one action's sums). Rows are always recomputed from scratch,
 * never incrementally, so results are bit-identical to the uncached sweep
 * for any sequence of multiplier states.
 */
class FocInnerSolver {
 public:
  FocInnerSolver(const LotteryProblem& problem, SeparableSpec spec)
      : spec_(std::move(spec)) {
    problem.validate();
    const int na = problem.num_actions();
    const int ell = problem.num_per_action();
    const int m = problem.num_pooled();
    const int d = problem.dim();
    if (static_cast<int>(spec_.w.size()) != d) {
      throw std::invalid_argument("separable spec: one coordinate utility per dimension");
    }

    u0_.resize(na);
    u_coef_.resize(static_cast<std::size_t>(na) * d);
    v0_.resize(static_cast<std::size_t>(na) * ell);
    v_coef_.resize(static_cast<std::size_t>(na) * d * ell);
    for (int a = 0; a < na; ++a) {
      u0_[a] = spec_.u0(a);
      for (int r = 0; r < d; ++r) u_coef_[idx_ar(a, r, d)] = spec_.u_coef(a, r);
      for (int j = 0; j < ell; ++j) {
        v0_[static_cast<std::size_t>(a) * ell + j] = spec_.v0(j, a);
        for (int r = 0; r < d; ++r) {
          v_coef_[idx_ajr(a, r, j, d, ell)] = spec_.v_coef(j, a, r);
        }
      }
    }
    if (spec_.linear_g) {
      g_slope_.resize(static_cast<std::size_t>(na) * m * d);
      g_const_.resize(static_cast<std::size_t>(na) * m);
      Vec lo(static_cast<std::size_t>(d));
      for (int r = 0; r < d; ++r) lo[r] = problem.consumption_box[r].lo;
      for (int a = 0; a < na; ++a) {
        for (int i = 0; i < m; ++i) {
          double g_at_lo = pooled_value(problem, i, a, lo);
          for (int r = 0; r < d; ++r) {
            const double sl = spec_.g_slope(i, a, r);
            g_slope_[(static_cast<std::size_t>(a) * m + i) * d + r] = sl;
            g_at_lo -= sl * lo[r];
          }
          g_const_[static_cast<std::size_t>(a) * m + i] = g_at_lo;
        }
      }
    }
  }

  InnerResult operator()(const LotteryProblem& p, const MultiplierState& mult) const {
    const int na = p.num_actions();
    const int ell = p.num_per_action();
    const int m = p.num_pooled();
    const int d = p.dim();

    refresh_gamma_sums(mult, na, ell, d);

    InnerResult best;
    bool have_best = false;
    Vec c(static_cast<std::size_t>(d));
    Vec a_coef(static_cast<std::size_t>(d));

    for (int a = 0; a < na; ++a) {
      double value = u0_[a] - gamma_v0_[static_cast<std::size_t>(a)];

      for (int r = 0; r < d; ++r) {
        const double A = u_coef_[idx_ar(a, r, d)] - gamma_v_[idx_ar(a, r, d)];
        a_coef[static_cast<std::size_t>(r)] = A;

        const Interval& box = p.consumption_box[static_cast<std::size_t>(r)];
        double cr;
        if (A <= 0.0) {
          cr = box.lo;
        } else if (spec_.linear_g) {
          double B = 0.0;
          const double* srow = g_slope_.data() + static_cast<std::size_t>(a) * m * d + r;
          for (int i = 0; i < m; ++i) B += mult.lambda[i] * srow[static_cast<std::size_t>(i) * d];
          if (B <= 0.0) {
            require_bounded_above(box);
            cr = box.hi;
          } else {
            cr = std::clamp(spec_.w[static_cast<std::size_t>(r)].derivative_inverse(B / A),
                            box.lo, box.hi);
          }
        } else {
          require_bounded_above(box);
          cr = solve_coordinate_by_bisection(p, mult, a, r, A, box);
        }
        c[static_cast<std::size_t>(r)] = cr;
        value += A * spec_.w[static_cast<std::size_t>(r)].value(cr);
      }

      if (spec_.linear_g) {
        for (int i = 0; i < m; ++i) {
          double gi = g_const_[static_cast<std::size_t>(a) * m + i];
          const double* srow = g_slope_.data() + (static_cast<std::size_t>(a) * m + i) * d;
          for (int r = 0; r < d; ++r) gi += srow[r] * c[static_cast<std::size_t>(r)];
          value -= mult.lambda[i] * gi;
        }
      } else {
        for (int i = 0; i < m; ++i) value -= mult.lambda[i] * pooled_value(p, i, a, c);
      }

      if (!have_best || value > best.value) {
        best.a_index = a;
        best.c = c;
        best.value = value;
        have_best = true;
      }
    }
    return best;
  }

 private:
  static void require_bounded_above(const Interval& box) {
    if (!std::isfinite(box.hi)) {
      throw DualUnboundedDirection(
          "a positive payoff coefficient pulls an unbounded-above coordinate to +infinity; "
          "treat the dual value as unbounded and increase the pooled multipliers");
    }
  }

  static std::size_t idx_ar(int a, int r, int d) {
    return static_cast<std::size_t>(a) * d + r;
  }
  static std::size_t idx_ajr(int a, int r, int j, int d, int ell) {
    return (static_cast<std::size_t>(a) * d + r) * ell + j;
  }

  double solve_coordinate_by_bisection(const LotteryProblem& p, const MultiplierState& mult,
                                       int a, int r, double A, const Interval& box) const {
    auto residual = [&](double cr) {
      double price = 0.0;
      for (int i = 0; i < p.num_pooled(); ++i) {
        price += mult.lambda[i] * spec_.g_partial(i, a, r, cr);
      }
      return A * spec_.w[static_cast<std::size_t>(r)].derivative(cr) - price;
    };
    // The residual is decreasing: w_r' falls and the price is nondecreasing.
    if (residual(box.lo) <= 0.0) return box.lo;
    if (residual(box.hi) >= 0.0) return box.hi;
    double lo = box.lo, hi = box.hi;
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (residual(mid) > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

  // Refreshes the memoized gamma-weighted sums: an action's sums are redone
  // from scratch whenever its gamma row is not bit-identical to the row last
  // summed. Bitwise equality is a sound memo key because the sums are a
  // deterministic function of the row's bits; differing bit patterns that
  // compare numerically equal (signed zeros) merely trigger a recompute with
  // the same result.
  void refresh_gamma_sums(const MultiplierState& mult, int na, int ell, int d) const {
    const std::size_t total = static_cast<std::size_t>(na) * ell;
    if (seen_gamma_.size() != total ||
        gamma_v0_.size() != static_cast<std::size_t>(na) ||
        gamma_v_.size() != static_cast<std::size_t>(na) * d) {
      seen_gamma_.assign(total, 0.0);
      gamma_v0_.assign(static_cast<std::size_t>(na), 0.0);
      gamma_v_.assign(static_cast<std::size_t>(na) * d, 0.0);
      sums_ready_ = false;
    }
    if (ell == 0) {
      // No per-action constraints: every gamma-weighted sum is zero and the
      // freshly assigned buffers already hold that.
      sums_ready_ = true;
      return;
    }
    const std::size_t row_bytes = static_cast<std::size_t>(ell) * sizeof(double);
    for (int a = 0; a < na; ++a) {
      const double* gcol = mult.gamma.data() + static_cast<std::size_t>(a) * ell;
      double* seen = seen_gamma_.data() + static_cast<std::size_t>(a) * ell;
      if (sums_ready_ && std::memcmp(gcol, seen, row_bytes) == 0) continue;
      const double* v0row = v0_.data() + static_cast<std::size_t>(a) * ell;
      double acc0 = 0.0;
      for (int j = 0; j < ell; ++j) acc0 += gcol[j] * v0row[j];
      gamma_v0_[static_cast<std::size_t>(a)] = acc0;
      for (int r = 0; r < d; ++r) {
        const double* vrow = v_coef_.data() + idx_ajr(a, r, 0, d, ell);
        double acc = 0.0;
        for (int j = 0; j < ell; ++j) acc += gcol[j] * vrow[j];
        gamma_v_[idx_ar(a, r, d)] = acc;
      }
      std::copy(gcol, gcol + ell, seen);
    }
    sums_ready_ = true;
  }

  SeparableSpec spec_;
  Vec u0_;
  Vec u_coef_;
  Vec v0_;
  Vec v_coef_;
  Vec g_slope_;
  Vec g_const_;
  mutable Vec seen_gamma_;
  mutable Vec gamma_v0_;
  mutable Vec gamma_v_;
  mutable bool sums_ready_ = false;
};

/// One-shot first-order argmax; prefer constructing FocInnerSolver once when
/// iterating, so the coefficient tables are reused.
inline InnerResult foc_argmax(const LotteryProblem& p, const MultiplierState& mult,
                              const SeparableSpec& spec) {
  return FocInnerSolver(p, spec)(p, mult);
}

/**
 * Spot-checks a separable spec against its owning problem: the coordinate
 * utilities must be increasing and concave on sampled points with consistent
 * derivative inverses, and the coefficient expansion must reproduce the
 * payoff and constraint callbacks at sampled box points.
 */
inline void validate_separable_spec(const LotteryProblem& p, const SeparableSpec& spec,
                                    int samples_per_coordinate = 7, double tol = 1e-8) {
  const int d = p.dim();
  if (static_cast<int>(spec.w.size()) != d) {
    throw std::invalid_argument("separable spec: dimension mismatch");
  }
  for (int r = 0; r < d; ++r) {
    const Interval& box = p.consumption_box[static_cast<std::size_t>(r)];
    const auto& w = spec.w[static_cast<std::size_t>(r)];
    double prev_val = 0.0, prev_der = 0.0;
    for (int s = 0; s < samples_per_coordinate; ++s) {
      const double t = (s + 0.5) / samples_per_coordinate;
      const double cr = box.lo + t * (box.hi - box.lo);
      const double val = w.value(cr);
      const double der = w.derivative(cr);
      if (!(der > 0.0)) throw std::invalid_argument("separable spec: w_r not increasing");
      if (s > 0 && !(val > prev_val)) {
        throw std::invalid_argument("separable spec: w_r not increasing");
      }
      if (s > 0 && !(der <= prev_der + tol)) {
        throw std::invalid_argument("separable spec: w_r derivative not decreasing");
      }
      if (std::abs(w.derivative_inverse(der) - cr) > 1e-10 * std::max(1.0, std::abs(cr))) {
        throw std::invalid_argument("separable spec: derivative inverse mismatch");
      }
      prev_val = val;
      prev_der = der;
    }
  }

  Vec c(static_cast<std::size_t>(d));
  for (int a = 0; a < p.num_actions(); ++a) {
    for (int s = 0; s < samples_per_coordinate; ++s) {
      for (int r = 0; r < d; ++r) {
        const Interval& box = p.consumption_box[static_cast<std::size_t>(r)];
        const double t = (s + 0.5 + 0.13 * r) / (samples_per_coordinate + 0.13 * d);
        c[static_cast<std::size_t>(r)] = box.lo + t * (box.hi - box.lo);
      }
      double f = spec.u0(a);
      for (int r = 0; r < d; ++r) {
        f += spec.u_coef(a, r) * spec.w[static_cast<std::size_t>(r)].value(c[r]);
      }
      if (std::abs(f - p.payoff(a, c)) > tol) {
        throw std::invalid_argument("separable spec: payoff expansion mismatch");
      }
      for (int j = 0; j < p.num_per_action(); ++j) {
        double h = spec.v0(j, a);
        for (int r = 0; r < d; ++r) {
          h += spec.v_coef(j, a, r) * spec.w[static_cast<std::size_t>(r)].value(c[r]);
        }
        if (std::abs(h - p.per_action_constraints[j](a, c)) > tol) {
          throw std::invalid_argument("separable spec: per-action expansion mismatch");
        }
      }
      if (spec.linear_g && !p.pooled_constraints.empty()) {
        Vec lo(static_cast<std::size_t>(d));
        for (int r = 0; r < d; ++r) lo[r] = p.consumption_box[static_cast<std::size_t>(r)].lo;
        for (int i = 0; i < p.num_pooled(); ++i) {
          double gi = p.pooled_constraints[i](a, lo);
          for (int r = 0; r < d; ++r) {
            gi += spec.g_slope(i, a, r) * (c[r] - lo[r]);
          }
          if (std::abs(gi - p.pooled_constraints[i](a, c)) > tol) {
            throw std::invalid_argument("separable spec: pooled constraint not affine as declared");
          }
        }
      }
    }
  }
}

}  // namespace lotsol
