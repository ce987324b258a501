#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lotsol/loop.hpp"
#include "lotsol/problem.hpp"
#include "lotsol/solution.hpp"

namespace lotsol::tax {

/**
 * Multi-type income-taxation planning model. A finite set of worker types
 * differs in productivity w, Frisch elasticity eta, labor-disutility weight
 * psi, and population weight omega. Type h consuming c and producing output y
 * enjoys
 *
 *     u_h(c, y) = log(c) - psi_tilde_h * y^{p_h} / p_h,
 *     p_h = 1/eta_h + 1,     psi_tilde_h = psi_h / w_h^{p_h}.
 *
 * The planner maximizes sum_h omega_h u_h(c_h, y_h) over lotteries subject to
 * truth-telling constraints (type h must weakly prefer its own bundle to any
 * other type's, in expectation) and the pooled resource constraint
 * sum_h omega_h (c_h - y_h) <= 0. With uniform weights this is the unweighted
 * per-capita planner problem.
 */

struct TypeSpec {
  double w = 1.0;      // productivity
  double eta = 1.0;    // Frisch elasticity of labor supply
  double psi = 1.0;    // labor-disutility weight
  double omega = 1.0;  // population weight
};

/// Which truth-telling constraints to impose: every ordered pair, or only
/// pairs where the truthful type's elasticity is at least the mimicked one's
/// (under the relaxed set, less elastic types never envy more elastic ones,
/// and the optimum is lottery-free).
enum class IcMode { full, partial };

inline const char* to_string(IcMode m) { return m == IcMode::full ? "full" : "partial"; }

struct TaxEconomy {
  std::vector<TypeSpec> types;
  double c_min = 1e-3;   // consumption floor, must be > 0 (log utility)
  double c_max = 10.0;   // may be +infinity; then a zero resource multiplier
                         // leaves the dual without a finite maximizer
  double ell_max = 1.2;  // labor bound; type h's output lives in [0, ell_max * w]

  int num_types() const { return static_cast<int>(types.size()); }
  double exponent(int h) const { return 1.0 / types[static_cast<std::size_t>(h)].eta + 1.0; }
  double psi_tilde(int h) const {
    const TypeSpec& t = types[static_cast<std::size_t>(h)];
    return t.psi / std::pow(t.w, exponent(h));
  }
  double y_max(int h) const { return ell_max * types[static_cast<std::size_t>(h)].w; }

  double utility(int h, double c, double y) const;

  void validate() const {
    if (types.empty()) throw std::invalid_argument("tax economy: no types");
    double omega_sum = 0.0;
    for (const TypeSpec& t : types) {
      if (!(t.w > 0.0) || !(t.eta > 0.0) || !(t.psi > 0.0) || !(t.omega > 0.0)) {
        throw std::invalid_argument("tax economy: w, eta, psi, omega must all be positive");
      }
      omega_sum += t.omega;
    }
    if (std::abs(omega_sum - 1.0) > 1e-9) {
      throw std::invalid_argument("tax economy: population weights must sum to 1");
    }
    if (!(c_min > 0.0)) throw std::invalid_argument("tax economy: c_min must be positive");
    if (!(c_max > c_min) || std::isnan(c_max)) {
      throw std::invalid_argument("tax economy: c_max must exceed c_min");
    }
    if (!(ell_max > 0.0) || !std::isfinite(ell_max)) {
      throw std::invalid_argument("tax economy: ell_max must be positive finite");
    }
  }

  /// 25-type calibration: w in {1..5} crossed with eta in {1, 1/2, 1/3, 1/5,
  /// 1/8} (w-major, eta descending within w), psi = 1, uniform weights,
  /// ell_max = 1.2. Type index 5*(w-1) + e.
  static TaxEconomy judd25();

  /// H types sharing one elasticity, w = 1..H, uniform weights. The optimum
  /// is deterministic for any common eta.
  static TaxEconomy equal_eta(int n_types, double eta);

  /// 5 types with w = 1..5 and eta = {1, 1/2, 1/3, 1/5, 1/8} paired
  /// diagonally; used with IcMode::partial the optimum is deterministic.
  static TaxEconomy diagonal5();
};

namespace detail {

/// y^p with a fast path for small integral exponents (the calibrated
/// elasticity grid makes every p an integer).
inline double pow_maybe_int(double y, double p) {
  const double r = std::nearbyint(p);
  if (r == p && r >= 0.0 && r <= 64.0) {
    int n = static_cast<int>(r);
    double acc = 1.0, base = y;
    while (n > 0) {
      if (n & 1) acc *= base;
      base *= base;
      n >>= 1;
    }
    return acc;
  }
  return std::pow(y, p);
}

}  // namespace detail

inline double TaxEconomy::utility(int h, double c, double y) const {
  const double p = exponent(h);
  return std::log(c) - psi_tilde(h) * detail::pow_maybe_int(y, p) / p;
}

inline TaxEconomy TaxEconomy::judd25() {
  TaxEconomy econ;
  const double etas[5] = {1.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 5.0, 1.0 / 8.0};
  for (int w = 1; w <= 5; ++w) {
    for (double eta : etas) econ.types.push_back({static_cast<double>(w), eta, 1.0, 1.0 / 25.0});
  }
  econ.c_min = 1e-3;
  econ.c_max = 10.0;
  econ.ell_max = 1.2;
  return econ;
}

inline TaxEconomy TaxEconomy::equal_eta(int n_types, double eta) {
  if (n_types < 1) throw std::invalid_argument("equal_eta: need at least one type");
  TaxEconomy econ;
  for (int i = 1; i <= n_types; ++i) {
    econ.types.push_back({static_cast<double>(i), eta, 1.0, 1.0 / n_types});
  }
  return econ;
}

inline TaxEconomy TaxEconomy::diagonal5() {
  TaxEconomy econ;
  const double etas[5] = {1.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 5.0, 1.0 / 8.0};
  for (int i = 0; i < 5; ++i) econ.types.push_back({static_cast<double>(i + 1), etas[i], 1.0, 0.2});
  return econ;
}

/// One truth-telling constraint: `truthful` must not prefer the bundle meant
/// for `mimicked`.
struct IcPair {
  int truthful = 0;
  int mimicked = 0;
};

/// Ordered constraint list. Full mode: all H(H-1) ordered pairs,
/// lexicographic. Partial mode: only pairs with eta_truthful >= eta_mimicked
/// (ties included).
inline std::vector<IcPair> ic_pairs(const TaxEconomy& econ, IcMode mode) {
  std::vector<IcPair> pairs;
  const int H = econ.num_types();
  for (int h = 0; h < H; ++h) {
    for (int g = 0; g < H; ++g) {
      if (g == h) continue;
      if (mode == IcMode::partial &&
          !(econ.types[static_cast<std::size_t>(h)].eta >=
            econ.types[static_cast<std::size_t>(g)].eta - 1e-12)) {
        continue;
      }
      pairs.push_back({h, g});
    }
  }
  return pairs;
}

namespace detail {

struct TaxData {
  TaxEconomy econ;
  IcMode mode = IcMode::full;
  std::vector<IcPair> pairs;
  // Distinct disutility exponents and each type's slot in that list.
  std::vector<double> level_exponents;
  std::vector<int> level_of_type;
  std::vector<double> p;          // exponent per type
  std::vector<double> psi_t;      // psi_tilde per type
  std::vector<double> psi_t_byp;  // psi_tilde / p per type

  int levels() const { return static_cast<int>(level_exponents.size()); }
};

inline std::shared_ptr<const TaxData> make_tax_data(const TaxEconomy& econ, IcMode mode) {
  econ.validate();
  auto d = std::make_shared<TaxData>();
  d->econ = econ;
  d->mode = mode;
  d->pairs = ic_pairs(econ, mode);
  const int H = econ.num_types();
  d->p.resize(static_cast<std::size_t>(H));
  d->psi_t.resize(static_cast<std::size_t>(H));
  d->psi_t_byp.resize(static_cast<std::size_t>(H));
  d->level_of_type.resize(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) {
    d->p[static_cast<std::size_t>(h)] = econ.exponent(h);
    d->psi_t[static_cast<std::size_t>(h)] = econ.psi_tilde(h);
    d->psi_t_byp[static_cast<std::size_t>(h)] =
        d->psi_t[static_cast<std::size_t>(h)] / d->p[static_cast<std::size_t>(h)];
    int lvl = -1;
    for (std::size_t k = 0; k < d->level_exponents.size(); ++k) {
      if (std::abs(d->level_exponents[k] - d->p[static_cast<std::size_t>(h)]) < 1e-12) {
        lvl = static_cast<int>(k);
        break;
      }
    }
    if (lvl < 0) {
      lvl = static_cast<int>(d->level_exponents.size());
      d->level_exponents.push_back(d->p[static_cast<std::size_t>(h)]);
    }
    d->level_of_type[static_cast<std::size_t>(h)] = lvl;
  }
  return d;
}

}  // namespace detail

/**
 * The taxation model as a lottery problem. The action set is a single dummy
 * point; every constraint is pooled (holds in expectation), with the
 * truth-telling rows first (in `pairs` order) and the resource row last.
 * Coordinates: r in [0, H) is c_r, r in [H, 2H) is y_{r-H}.
 */
struct TaxProblem {
  LotteryProblem problem;
  std::shared_ptr<const detail::TaxData> data;

  const TaxEconomy& economy() const { return data->econ; }
  IcMode mode() const { return data->mode; }
  const std::vector<IcPair>& pairs() const { return data->pairs; }
  int num_types() const { return data->econ.num_types(); }
  /// Index of the resource multiplier inside MultiplierState::lambda.
  int resource_index() const { return static_cast<int>(data->pairs.size()); }
};

inline TaxProblem to_problem(const TaxEconomy& econ, IcMode mode = IcMode::full) {
  auto data = detail::make_tax_data(econ, mode);
  const int H = econ.num_types();

  TaxProblem tp;
  tp.data = data;
  tp.problem.actions = {Vec{0.0}};  // single dummy action
  tp.problem.consumption_box.resize(static_cast<std::size_t>(2 * H));
  for (int h = 0; h < H; ++h) {
    tp.problem.consumption_box[static_cast<std::size_t>(h)] = {econ.c_min, econ.c_max};
    tp.problem.consumption_box[static_cast<std::size_t>(H + h)] = {0.0, econ.y_max(h)};
  }

  tp.problem.payoff = [data, H](int, const Vec& x) {
    double acc = 0.0;
    for (int h = 0; h < H; ++h) {
      acc += data->econ.types[static_cast<std::size_t>(h)].omega *
             data->econ.utility(h, x[static_cast<std::size_t>(h)],
                                x[static_cast<std::size_t>(H + h)]);
    }
    return acc;
  };

  for (const IcPair& pr : data->pairs) {
    tp.problem.pooled_constraints.push_back([data, pr, H](int, const Vec& x) {
      const double own = data->econ.utility(pr.truthful, x[static_cast<std::size_t>(pr.truthful)],
                                            x[static_cast<std::size_t>(H + pr.truthful)]);
      const double other = data->econ.utility(
          pr.truthful, x[static_cast<std::size_t>(pr.mimicked)],
          x[static_cast<std::size_t>(H + pr.mimicked)]);
      return other - own;  // <= 0: own bundle weakly preferred
    });
  }
  tp.problem.pooled_constraints.push_back([data, H](int, const Vec& x) {
    double acc = 0.0;
    for (int h = 0; h < H; ++h) {
      acc += data->econ.types[static_cast<std::size_t>(h)].omega *
             (x[static_cast<std::size_t>(h)] - x[static_cast<std::size_t>(H + h)]);
    }
    return acc;  // <= 0: consumption funded by output
  });
  return tp;
}

/// Zero multipliers except the resource row.
inline MultiplierState initial_tax_multipliers(const TaxProblem& tp,
                                               double resource_lambda = 0.5) {
  MultiplierState mult = MultiplierState::zeros(tp.problem.num_pooled(), 0, 1);
  mult.lambda[static_cast<std::size_t>(tp.resource_index())] = resource_lambda;
  return mult;
}

/**
 * Exact per-type maximizer of the decomposed Lagrangian. Writing S_out(h) for
 * the total multiplier mass on rows where h is truthful and S_in(h) for rows
 * where h is mimicked, the bundle-h term is
 *
 *   L_h(c, y) = (omega_h + S_out(h)) u_h(c, y) - sum_{g} lambda_{g->h} u_g(c, y)
 *               - gamma * omega_h * (c - y).
 *
 * The consumption part A_h log(c) - gamma omega_h c (A_h = omega_h + S_out -
 * S_in) has the closed-form maximizer clip(A_h / (gamma omega_h)) when
 * A_h > 0, else the floor. The output part is a signed mix of powers
 * y^{p} plus a linear term; it is maximized by a bracket scan over a fixed
 * grid refined with golden-section search around every local peak (the mix is
 * not concave: mimicking terms enter with a positive convex contribution).
 *
 * Instances hold precomputed power tables for the scan grid; calls mutate
 * scratch space, so share one instance per thread.
 */
class TaxInnerSolver {
 public:
  explicit TaxInnerSolver(const TaxProblem& tp, int scan_intervals = 512)
      : data_(tp.data), scan_n_(scan_intervals) {
    if (scan_intervals < 8) {
      throw std::invalid_argument("tax inner solver: need at least 8 scan intervals");
    }
    const int H = data_->econ.num_types();
    const int L = data_->levels();
    y_grid_.resize(static_cast<std::size_t>(H));
    y_pow_.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      const double ymax = data_->econ.y_max(h);
      auto& grid = y_grid_[static_cast<std::size_t>(h)];
      grid.resize(static_cast<std::size_t>(scan_n_) + 1);
      for (int i = 0; i <= scan_n_; ++i) {
        grid[static_cast<std::size_t>(i)] = ymax * static_cast<double>(i) / scan_n_;
      }
      auto& pw = y_pow_[static_cast<std::size_t>(h)];
      pw.assign(static_cast<std::size_t>(L) * (static_cast<std::size_t>(scan_n_) + 1), 0.0);
      for (int k = 0; k < L; ++k) {
        const double p = data_->level_exponents[static_cast<std::size_t>(k)];
        for (int i = 0; i <= scan_n_; ++i) {
          pw[static_cast<std::size_t>(k) * (static_cast<std::size_t>(scan_n_) + 1) +
             static_cast<std::size_t>(i)] =
              detail::pow_maybe_int(grid[static_cast<std::size_t>(i)], p);
        }
      }
    }
    s_out_.resize(static_cast<std::size_t>(H));
    s_in_.resize(static_cast<std::size_t>(H));
    coef_.resize(static_cast<std::size_t>(H) * static_cast<std::size_t>(L));
    phi_.resize(static_cast<std::size_t>(scan_n_) + 1);
  }

  InnerResult operator()(const LotteryProblem& problem, const MultiplierState& mult) {
    const int H = data_->econ.num_types();
    const int L = data_->levels();
    const auto& lam = mult.lambda;
    const double gamma = lam[data_->pairs.size()];

    std::fill(s_out_.begin(), s_out_.end(), 0.0);
    std::fill(s_in_.begin(), s_in_.end(), 0.0);
    std::fill(coef_.begin(), coef_.end(), 0.0);
    for (std::size_t idx = 0; idx < data_->pairs.size(); ++idx) {
      const double l = lam[idx];
      if (l == 0.0) continue;
      const IcPair& pr = data_->pairs[idx];
      s_out_[static_cast<std::size_t>(pr.truthful)] += l;
      s_in_[static_cast<std::size_t>(pr.mimicked)] += l;
      // Mimicking term: +lambda * psi_tilde_truthful * y^{p_truthful} / p.
      coef_[static_cast<std::size_t>(pr.mimicked) * static_cast<std::size_t>(L) +
            static_cast<std::size_t>(data_->level_of_type[static_cast<std::size_t>(pr.truthful)])] +=
          l * data_->psi_t_byp[static_cast<std::size_t>(pr.truthful)];
    }

    InnerResult out;
    out.a_index = 0;
    out.c.resize(static_cast<std::size_t>(2 * H));
    double total = 0.0;
    for (int h = 0; h < H; ++h) {
      const double omega = data_->econ.types[static_cast<std::size_t>(h)].omega;
      const double weight_own = omega + s_out_[static_cast<std::size_t>(h)];
      const double a_coef = weight_own - s_in_[static_cast<std::size_t>(h)];
      coef_[static_cast<std::size_t>(h) * static_cast<std::size_t>(L) +
            static_cast<std::size_t>(data_->level_of_type[static_cast<std::size_t>(h)])] -=
          weight_own * data_->psi_t_byp[static_cast<std::size_t>(h)];

      const auto [c_star, c_value] = maximize_consumption(a_coef, gamma * omega);
      const auto [y_star, y_value] = maximize_output(h, gamma * omega);
      out.c[static_cast<std::size_t>(h)] = c_star;
      out.c[static_cast<std::size_t>(H + h)] = y_star;
      total += c_value + y_value;
    }
    out.value = total;
    (void)problem;
    return out;
  }

 private:
  // argmax of a_coef * log(c) - rate * c on [c_min, c_max].
  std::pair<double, double> maximize_consumption(double a_coef, double rate) const {
    const double lo = data_->econ.c_min;
    const double hi = data_->econ.c_max;
    double c;
    if (a_coef <= 0.0) {
      c = lo;
    } else if (rate <= 0.0) {
      if (!std::isfinite(hi)) {
        throw DualUnboundedDirection(
            "a positive consumption coefficient meets a zero resource multiplier on an "
            "unbounded consumption interval; treat the dual value as unbounded and raise the "
            "resource multiplier");
      }
      c = hi;
    } else {
      c = std::clamp(a_coef / rate, lo, hi);
    }
    return {c, a_coef * std::log(c) - rate * c};
  }

  double phi_at(int h, const double* coef_row, double linear_rate, double y) const {
    const int L = data_->levels();
    double acc = linear_rate * y;
    for (int k = 0; k < L; ++k) {
      const double ck = coef_row[k];
      if (ck != 0.0) {
        acc += ck * detail::pow_maybe_int(y, data_->level_exponents[static_cast<std::size_t>(k)]);
      }
    }
    (void)h;
    return acc;
  }

  // argmax of sum_k coef_k y^{p_k} + rate * y on [0, y_max(h)]: grid scan,
  // then golden-section refinement of every local peak.
  std::pair<double, double> maximize_output(int h, double rate) {
    const int L = data_->levels();
    const double* coef_row = &coef_[static_cast<std::size_t>(h) * static_cast<std::size_t>(L)];
    const auto& grid = y_grid_[static_cast<std::size_t>(h)];
    const auto& pw = y_pow_[static_cast<std::size_t>(h)];
    const std::size_t np = static_cast<std::size_t>(scan_n_) + 1;

    for (std::size_t i = 0; i < np; ++i) phi_[i] = rate * grid[i];
    for (int k = 0; k < L; ++k) {
      const double ck = coef_row[k];
      if (ck == 0.0) continue;
      const double* col = &pw[static_cast<std::size_t>(k) * np];
      for (std::size_t i = 0; i < np; ++i) phi_[i] += ck * col[i];
    }

    double best_y = grid[0];
    double best_v = phi_[0];
    auto consider = [&](double y, double v) {
      if (v > best_v) {
        best_v = v;
        best_y = y;
      }
    };
    consider(grid[np - 1], phi_[np - 1]);

    for (std::size_t i = 0; i < np; ++i) {
      const bool left_ok = i == 0 || phi_[i] >= phi_[i - 1];
      const bool right_ok = i + 1 == np || phi_[i] >= phi_[i + 1];
      if (!(left_ok && right_ok)) continue;
      const double lo = grid[i == 0 ? 0 : i - 1];
      const double hi = grid[i + 1 == np ? np - 1 : i + 1];
      if (hi <= lo) {
        consider(grid[i], phi_[i]);
        continue;
      }
      auto f = [&](double y) { return phi_at(h, coef_row, rate, y); };
      constexpr double kInvPhi = 0.6180339887498949;
      double a = lo, b = hi;
      double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
      double f1 = f(x1), f2 = f(x2);
      while (b - a > 1e-10 * (1.0 + b)) {
        if (f1 >= f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - kInvPhi * (b - a);
          f1 = f(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + kInvPhi * (b - a);
          f2 = f(x2);
        }
      }
      const double mid = 0.5 * (a + b);
      consider(mid, f(mid));
    }
    return {best_y, best_v};
  }

  std::shared_ptr<const detail::TaxData> data_;
  int scan_n_;
  std::vector<Vec> y_grid_;  // per type: scan_n_+1 points on [0, y_max]
  std::vector<Vec> y_pow_;   // per type: levels x (scan_n_+1), level-major
  Vec s_out_, s_in_, coef_, phi_;
};

/// Spec-level view of one inner maximization (used by tests and reports).
struct PerTypeArgmax {
  Vec c;            // one entry per type
  Vec y;            // one entry per type
  double value = 0.0;  // maximized Lagrangian total
};

inline PerTypeArgmax per_type_argmax(const TaxProblem& tp, const MultiplierState& mult) {
  TaxInnerSolver solver(tp);
  InnerResult res = solver(tp.problem, mult);
  const int H = tp.num_types();
  PerTypeArgmax out;
  out.c.assign(res.c.begin(), res.c.begin() + H);
  out.y.assign(res.c.begin() + H, res.c.end());
  out.value = res.value;
  return out;
}

/// Memory-lean defaults for long runs: per-iterate constraint vectors are
/// large here (hundreds of pooled rows), so only aggregates are logged.
inline LoopOptions default_tax_loop_options() {
  LoopOptions opts;
  opts.log_constraint_values = false;
  opts.feasibility_sample_stride = 1000;
  return opts;
}

/// Step rule tuned empirically on the 25-type calibration (the reference
/// experiments leave it unstated): mu^k = s / (k + k0)^p.
inline StepSchedule default_tax_schedule() { return StepSchedule(0.5, 100.0, 0.8); }
inline int default_tax_iterations() { return 200'000; }

struct TaxSolveResult {
  IterateLog log;
  LotterySolution lottery;
};

/**
 * Full pipeline: iterate, build the windowed lottery (defaults to the final
 * 5%), certify. `cluster_tol` merges nearby joint (c, y) profiles.
 */
inline TaxSolveResult solve_tax(const TaxProblem& tp, const StepSchedule& schedule,
                                int n_iters, std::pair<int, int> window = {0, 0},
                                double cluster_tol = 2e-2,
                                const LoopOptions& opts = default_tax_loop_options(),
                                double initial_resource_lambda = 0.5) {
  TaxInnerSolver inner(tp);
  MultiplierState init = initial_tax_multipliers(tp, initial_resource_lambda);
  TaxSolveResult out;
  out.log = run_iteration_loop(tp.problem, init, schedule, n_iters, inner, opts);
  if (window.first <= 0 || window.second <= 0) window = tail_window(out.log);
  out.lottery = construct_lottery(out.log, window.first, window.second, cluster_tol);
  out.lottery.eps_report = certify_eps(tp.problem, out.lottery, out.log);
  return out;
}

// ---------------------------------------------------------------------------
// Per-type marginals of a joint lottery
// ---------------------------------------------------------------------------

/// One cluster of a type's marginal: consumption/output center of mass and
/// total probability.
struct TypeAtom {
  double c = 0.0;
  double y = 0.0;
  double probability = 0.0;
};

namespace detail {

template <class Key>
inline std::vector<TypeAtom> cluster_marginal(const LotterySolution& lottery, int h, int H,
                                              double tol, Key&& key) {
  if (h < 0 || h >= H) throw std::invalid_argument("type marginal: type index out of range");
  struct Cl {
    double c_sum = 0.0, y_sum = 0.0, wsum = 0.0;
    double kc = 0.0, ky = 0.0;  // running cluster key
  };
  std::vector<Cl> cls;
  for (const LotteryAtom& atom : lottery.atoms) {
    const double c = atom.c[static_cast<std::size_t>(h)];
    const double y = atom.c[static_cast<std::size_t>(H + h)];
    const auto [kc, ky] = key(c, y);
    bool merged = false;
    for (Cl& cl : cls) {
      if (std::abs(cl.kc - kc) < tol && std::abs(cl.ky - ky) < tol) {
        const double w = cl.wsum + atom.probability;
        cl.kc = (cl.wsum * cl.kc + atom.probability * kc) / w;
        cl.ky = (cl.wsum * cl.ky + atom.probability * ky) / w;
        cl.c_sum += atom.probability * c;
        cl.y_sum += atom.probability * y;
        cl.wsum = w;
        merged = true;
        break;
      }
    }
    if (!merged) cls.push_back({atom.probability * c, atom.probability * y, atom.probability, kc, ky});
  }
  std::vector<TypeAtom> out;
  out.reserve(cls.size());
  for (const Cl& cl : cls) out.push_back({cl.c_sum / cl.wsum, cl.y_sum / cl.wsum, cl.wsum});
  std::sort(out.begin(), out.end(),
            [](const TypeAtom& a, const TypeAtom& b) { return a.probability > b.probability; });
  return out;
}

}  // namespace detail

/// Type h's (c, y)-marginal, greedily clustered at max-norm `tol` over both
/// coordinates. Atoms sorted by descending probability.
inline std::vector<TypeAtom> type_marginal(const LotterySolution& lottery, int h, int H,
                                           double tol = 2e-2) {
  return detail::cluster_marginal(lottery, h, H, tol,
                                  [](double c, double y) { return std::pair{c, y}; });
}

/// Type h's output marginal: clusters on y alone; the c field reports the
/// cluster's mean consumption.
inline std::vector<TypeAtom> y_marginal(const LotterySolution& lottery, int h, int H,
                                        double tol = 2e-2) {
  return detail::cluster_marginal(lottery, h, H, tol,
                                  [](double, double y) { return std::pair{0.0, y}; });
}

// ---------------------------------------------------------------------------
// Full-information benchmark and welfare accounting
// ---------------------------------------------------------------------------

/// A deterministic allocation (one bundle per type).
struct Allocation {
  Vec c;
  Vec y;
};

/// Population-weighted welfare of a deterministic allocation.
inline double allocation_welfare(const TaxEconomy& econ, const Allocation& alloc) {
  econ.validate();
  const int H = econ.num_types();
  if (static_cast<int>(alloc.c.size()) != H || static_cast<int>(alloc.y.size()) != H) {
    throw std::invalid_argument("allocation_welfare: wrong allocation size");
  }
  double acc = 0.0;
  for (int h = 0; h < H; ++h) {
    acc += econ.types[static_cast<std::size_t>(h)].omega *
           econ.utility(h, alloc.c[static_cast<std::size_t>(h)],
                        alloc.y[static_cast<std::size_t>(h)]);
  }
  return acc;
}

/// Reference deterministic optimum for the 25-type calibration (benchmark
/// allocations computed with conventional nonlinear programming; row order
/// matches TaxEconomy::judd25()).
inline Allocation judd25_deterministic_benchmark() {
  Allocation a;
  a.c = {1.68, 1.77, 1.79, 1.83, 1.86,  //
         1.86, 2.03, 2.07, 2.16, 2.20,  //
         2.20, 2.47, 2.47, 2.55, 2.62,  //
         3.36, 3.36, 3.36, 3.36, 3.36,  //
         4.87, 4.49, 4.34, 4.11, 4.00};
  a.y = {0.42, 0.62, 0.65, 0.77, 0.86,  //
         0.86, 1.39, 1.50, 1.74, 1.83,  //
         1.83, 2.49, 2.49, 2.68, 2.85,  //
         4.00, 4.00, 4.00, 4.00, 4.00,  //
         5.87, 5.56, 5.43, 5.24, 5.14};
  return a;
}

/**
 * Interior full-information optimum with `m` units of resources destroyed:
 *
 *   max sum_h omega_h u_h(c_h, y_h)   s.t.  sum_h omega_h (c_h - y_h) <= -m.
 *
 * With log consumption utility every type consumes 1/gamma; output follows
 * y_h = (gamma / psi_tilde_h)^{eta_h}. The resource balance pins gamma by
 * bisection (the balance is strictly increasing in gamma). Box bounds are
 * intentionally ignored: the account benchmarks against the unconstrained
 * interior optimum, matching the reported full-information allocations.
 */
struct FirstBest {
  double gamma = 0.0;
  double welfare = 0.0;
  double consumption = 0.0;    // common per-type consumption 1/gamma
  double total_output = 0.0;   // sum_h omega_h y_h
  Vec y;                       // per-type output
};

inline FirstBest first_best(const TaxEconomy& econ, double m = 0.0) {
  econ.validate();
  const int H = econ.num_types();
  auto balance = [&](double gamma) {
    double out = 0.0;
    for (int h = 0; h < H; ++h) {
      out += econ.types[static_cast<std::size_t>(h)].omega *
             std::pow(gamma / econ.psi_tilde(h), econ.types[static_cast<std::size_t>(h)].eta);
    }
    return out - 1.0 / gamma - m;
  };
  double lo = 1.0, hi = 1.0;
  while (balance(lo) > 0.0) {
    lo *= 0.5;
    if (lo < 1e-12) throw std::runtime_error("first_best: no lower bracket for gamma");
  }
  while (balance(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e12) throw std::runtime_error("first_best: no upper bracket for gamma");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (balance(mid) < 0.0 ? lo : hi) = mid;
  }
  FirstBest fb;
  fb.gamma = 0.5 * (lo + hi);
  fb.consumption = 1.0 / fb.gamma;
  fb.y.resize(static_cast<std::size_t>(H));
  double welfare = 0.0, output = 0.0;
  for (int h = 0; h < H; ++h) {
    const double yh =
        std::pow(fb.gamma / econ.psi_tilde(h), econ.types[static_cast<std::size_t>(h)].eta);
    fb.y[static_cast<std::size_t>(h)] = yh;
    const double omega = econ.types[static_cast<std::size_t>(h)].omega;
    output += omega * yh;
    welfare += omega * econ.utility(h, fb.consumption, yh);
  }
  fb.total_output = output;
  fb.welfare = welfare;
  return fb;
}

/**
 * Compensating-variation welfare account. For each candidate welfare level
 * u^i, m^i is the amount of destroyed resources that brings the
 * full-information optimum down to u^i; the relative loss divides by the
 * undistorted full-information output.
 */
struct WelfareAccount {
  double u_first_best = 0.0;
  double u_deterministic = 0.0;
  double u_lottery = 0.0;
  double m_deterministic = 0.0;
  double m_lottery = 0.0;
  double loss_deterministic = 0.0;  // m^D / first-best resources
  double loss_lottery = 0.0;        // m^L / first-best resources
};

namespace detail {

inline double compensating_loss(const TaxEconomy& econ, double target_welfare,
                                double u_first_best) {
  if (target_welfare > u_first_best + 1e-12) {
    throw std::invalid_argument(
        "welfare account: candidate welfare exceeds the full-information optimum");
  }
  double lo = 0.0, hi = 1.0;
  while (first_best(econ, hi).welfare > target_welfare) {
    hi *= 2.0;
    if (hi > 1e9) throw std::runtime_error("welfare account: no bracket for m");
  }
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    (first_best(econ, mid).welfare > target_welfare ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline WelfareAccount welfare_account(const TaxEconomy& econ, double u_lottery,
                                      double u_deterministic) {
  if (!std::isfinite(u_lottery) || !std::isfinite(u_deterministic)) {
    throw std::invalid_argument("welfare account: welfare values must be finite");
  }
  const FirstBest fb = first_best(econ, 0.0);
  WelfareAccount acc;
  acc.u_first_best = fb.welfare;
  acc.u_deterministic = u_deterministic;
  acc.u_lottery = u_lottery;
  acc.m_deterministic = detail::compensating_loss(econ, u_deterministic, fb.welfare);
  acc.m_lottery = detail::compensating_loss(econ, u_lottery, fb.welfare);
  acc.loss_deterministic = acc.m_deterministic / fb.total_output;
  acc.loss_lottery = acc.m_lottery / fb.total_output;
  return acc;
}

}  // namespace lotsol::tax
