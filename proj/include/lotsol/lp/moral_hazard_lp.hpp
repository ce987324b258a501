#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lotsol/lp/instance.hpp"
#include "lotsol/models/moral_hazard.hpp"

namespace lotsol::lp {

/// Predicted dimensions of the discretized insurance-lottery LP.
struct MhLpSizes {
  long vars = 0;
  long equalities = 0;    // coinciding rows + normalization
  long inequalities = 0;  // resource + incentive rows
  std::size_t nonzero_bound = 0;  // upper bound on constraint-matrix nonzeros
};

/// Thrown when a build would exceed the configured nonzero cap; carries the
/// predicted sizes so callers can report them without building anything.
class SizeCapExceeded : public std::runtime_error {
 public:
  SizeCapExceeded(MhLpSizes sizes, std::size_t cap)
      : std::runtime_error("lp build refused: ~" + std::to_string(sizes.nonzero_bound) +
                           " constraint nonzeros exceed the cap of " + std::to_string(cap) +
                           " (" + std::to_string(sizes.vars) + " vars, " +
                           std::to_string(sizes.equalities) + " eq, " +
                           std::to_string(sizes.inequalities) + " ineq)"),
        sizes_(sizes),
        cap_(cap) {}
  const MhLpSizes& sizes() const { return sizes_; }
  std::size_t cap() const { return cap_; }

 private:
  MhLpSizes sizes_;
  std::size_t cap_;
};

struct MhLpOptions {
  double c_step = 0.01;                    // consumption grid spacing
  std::size_t max_nonzeros = 2'000'000;    // refuse builds above this bound
  // Divide incentive rows by |a - a_hat|^2, mirroring the iteration's ascent
  // scalers. Positive row scaling leaves the feasible set and optimum
  // unchanged; it only aligns LP dual multipliers with iteration gammas.
  bool comparison_scaling = false;
};

inline int mh_c_grid_count(const mh::MoralHazardModel& model, double c_step) {
  if (!(c_step > 0.0)) throw std::invalid_argument("lp: c_step must be positive");
  const double span = model.c_max - model.c_min;
  const int intervals = static_cast<int>(std::lround(span / c_step));
  if (intervals < 1 || std::abs(model.c_min + intervals * c_step - model.c_max) > 1e-9) {
    throw std::invalid_argument("lp: c_step does not divide the consumption range");
  }
  return intervals + 1;
}

/// Size accounting without building: variables |C||Q||A|, equalities
/// |Q||A| + 1, inequalities 1 + |A|(|A| - 1), and a nonzero upper bound of
/// |C||Q||A| (|Q| + |A| + 1) counting resource, normalization, coinciding,
/// and incentive rows.
inline MhLpSizes mh_lp_sizes(const mh::MoralHazardModel& model, double c_step) {
  model.validate();
  const long nc = mh_c_grid_count(model, c_step);
  const long na = model.num_actions();
  const long nq = static_cast<long>(model.outputs.size());
  MhLpSizes s;
  s.vars = nc * nq * na;
  s.equalities = nq * na + 1;
  s.inequalities = 1 + na * (na - 1);
  s.nonzero_bound = static_cast<std::size_t>(s.vars) * static_cast<std::size_t>(nq + na + 1);
  return s;
}

/**
 * The discretized insurance lottery as an explicit LP over probabilities
 * pi(c, q, a) on the product grid. Row order:
 *
 *   equalities:   coinciding rows (action-major, output within), which tie
 *                 each (q, a) slice mass to p(q | a) times the action mass,
 *                 then the normalization row last;
 *   inequalities: the resource row first, then incentive rows in
 *                 lexicographic (a, a_hat) order skipping a_hat == a.
 *
 * Variables are laid out (a-major, then q, then c). The incentive row for
 * (a, a_hat) uses likelihood ratios:
 *   sum_{c,q} pi(c,q,a) [ (p(q|a_hat)/p(q|a)) u(c,a_hat) - u(c,a) ] <= 0.
 */
struct MhLp {
  LpInstance instance;
  mh::MoralHazardModel model;
  Vec c_grid;
  Vec actions;
  std::vector<Vec> prob;  // p(q | a) rows

  int num_c() const { return static_cast<int>(c_grid.size()); }
  int num_q() const { return static_cast<int>(model.outputs.size()); }
  int num_a() const { return static_cast<int>(actions.size()); }

  int var_index(int c_i, int q_i, int a_i) const {
    return (a_i * num_q() + q_i) * num_c() + c_i;
  }
};

inline MhLp build_mh_lp(const mh::MoralHazardModel& model, const MhLpOptions& opts = {}) {
  const MhLpSizes sizes = mh_lp_sizes(model, opts.c_step);
  if (sizes.nonzero_bound > opts.max_nonzeros) {
    throw SizeCapExceeded(sizes, opts.max_nonzeros);
  }

  MhLp out;
  out.model = model;
  out.actions = model.action_values();
  out.prob = mh::build_prob_table(model);
  const int nc = mh_c_grid_count(model, opts.c_step);
  out.c_grid.resize(static_cast<std::size_t>(nc));
  for (int i = 0; i < nc; ++i) out.c_grid[static_cast<std::size_t>(i)] = model.c_min + i * opts.c_step;
  out.c_grid.back() = model.c_max;

  const int nq = out.num_q();
  const int na = out.num_a();
  LpInstance& lp = out.instance;
  lp.num_vars = static_cast<int>(sizes.vars);
  lp.objective.resize(static_cast<std::size_t>(lp.num_vars));
  lp.col_labels.resize(static_cast<std::size_t>(lp.num_vars));

  auto u = [&](double c, double a) { return model.v(c) + model.leisure(a); };

  for (int a = 0; a < na; ++a) {
    for (int q = 0; q < nq; ++q) {
      for (int c = 0; c < nc; ++c) {
        const int col = out.var_index(c, q, a);
        lp.objective[static_cast<std::size_t>(col)] =
            u(out.c_grid[static_cast<std::size_t>(c)], out.actions[static_cast<std::size_t>(a)]);
        lp.col_labels[static_cast<std::size_t>(col)] =
            "c=" + std::to_string(out.c_grid[static_cast<std::size_t>(c)]) +
            ",q=" + std::to_string(model.outputs[static_cast<std::size_t>(q)]) +
            ",a=" + std::to_string(out.actions[static_cast<std::size_t>(a)]);
      }
    }
  }

  // Coinciding equalities: for each (a, q_bar), the q_bar slice minus
  // p(q_bar | a) times the whole action block sums to zero.
  lp.eq_rows.reserve(static_cast<std::size_t>(nq) * na + 1);
  for (int a = 0; a < na; ++a) {
    for (int qb = 0; qb < nq; ++qb) {
      SparseRow row;
      const double p_qb = out.prob[static_cast<std::size_t>(a)][static_cast<std::size_t>(qb)];
      for (int q = 0; q < nq; ++q) {
        const double coef = (q == qb ? 1.0 : 0.0) - p_qb;
        for (int c = 0; c < nc; ++c) row.push(out.var_index(c, q, a), coef);
      }
      lp.eq_rows.push_back(std::move(row));
      lp.eq_rhs.push_back(0.0);
    }
  }
  {
    SparseRow norm;
    for (int col = 0; col < lp.num_vars; ++col) norm.push(col, 1.0);
    lp.normalization_row = static_cast<int>(lp.eq_rows.size());
    lp.eq_rows.push_back(std::move(norm));
    lp.eq_rhs.push_back(1.0);
  }

  // Resource inequality, then incentive rows.
  lp.ineq_rows.reserve(static_cast<std::size_t>(sizes.inequalities));
  {
    SparseRow res;
    for (int a = 0; a < na; ++a) {
      for (int q = 0; q < nq; ++q) {
        for (int c = 0; c < nc; ++c) {
          res.push(out.var_index(c, q, a),
                   out.c_grid[static_cast<std::size_t>(c)] -
                       model.outputs[static_cast<std::size_t>(q)]);
        }
      }
    }
    lp.ineq_rows.push_back(std::move(res));
    lp.ineq_rhs.push_back(0.0);
  }
  for (int a = 0; a < na; ++a) {
    for (int ah = 0; ah < na; ++ah) {
      if (ah == a) continue;
      double scale = 1.0;
      if (opts.comparison_scaling) {
        const double gap = out.actions[static_cast<std::size_t>(a)] -
                           out.actions[static_cast<std::size_t>(ah)];
        scale = 1.0 / (gap * gap);
      }
      SparseRow row;
      for (int q = 0; q < nq; ++q) {
        const double ratio = out.prob[static_cast<std::size_t>(ah)][static_cast<std::size_t>(q)] /
                             out.prob[static_cast<std::size_t>(a)][static_cast<std::size_t>(q)];
        for (int c = 0; c < nc; ++c) {
          const double cval = out.c_grid[static_cast<std::size_t>(c)];
          row.push(out.var_index(c, q, a),
                   scale * (ratio * u(cval, out.actions[static_cast<std::size_t>(ah)]) -
                            u(cval, out.actions[static_cast<std::size_t>(a)])));
        }
      }
      lp.ineq_rows.push_back(std::move(row));
      lp.ineq_rhs.push_back(0.0);
    }
  }

  lp.validate();
  return out;
}

/// Action marginal of an LP solution: total probability per action index.
inline Vec mh_lp_action_marginal(const MhLp& built, const Vec& x) {
  Vec marg(static_cast<std::size_t>(built.num_a()), 0.0);
  for (int a = 0; a < built.num_a(); ++a) {
    for (int q = 0; q < built.num_q(); ++q) {
      for (int c = 0; c < built.num_c(); ++c) {
        marg[static_cast<std::size_t>(a)] +=
            x[static_cast<std::size_t>(built.var_index(c, q, a))];
      }
    }
  }
  return marg;
}

/// Conditional mean consumption per (action, output); NaN when the (q, a)
/// cell carries no mass.
inline std::vector<Vec> mh_lp_consumption_means(const MhLp& built, const Vec& x) {
  std::vector<Vec> means(static_cast<std::size_t>(built.num_a()),
                         Vec(static_cast<std::size_t>(built.num_q()),
                             std::numeric_limits<double>::quiet_NaN()));
  for (int a = 0; a < built.num_a(); ++a) {
    for (int q = 0; q < built.num_q(); ++q) {
      double mass = 0.0, acc = 0.0;
      for (int c = 0; c < built.num_c(); ++c) {
        const double w = x[static_cast<std::size_t>(built.var_index(c, q, a))];
        mass += w;
        acc += w * built.c_grid[static_cast<std::size_t>(c)];
      }
      if (mass > 1e-12) means[static_cast<std::size_t>(a)][static_cast<std::size_t>(q)] = acc / mass;
    }
  }
  return means;
}

}  // namespace lotsol::lp
