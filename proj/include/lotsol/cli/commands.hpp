#pragma once

/**
 * Subcommand implementations for the command-line front-end: solve (run the
 * multiplier iteration and emit lottery artifacts), benchmark (performance
 * ladder over action-grid spacings), compare (iteration versus the
 * linear-programming oracle), and lp (export the oracle instance).
 *
 * Each command returns a process exit code:
 *   0  success
 *   2  configuration rejected
 *   3  solver or I/O failure
 *   4  size-cap refusal (the oracle instance would exceed its nonzero cap)
 */

#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lotsol/cli/artifacts.hpp"
#include "lotsol/cli/config.hpp"
#include "lotsol/loop.hpp"
#include "lotsol/lp/compare.hpp"
#include "lotsol/lp/moral_hazard_lp.hpp"
#include "lotsol/lp/mps.hpp"
#include "lotsol/lp/simplex.hpp"
#include "lotsol/models/moral_hazard.hpp"
#include "lotsol/models/taxation.hpp"
#include "lotsol/solution.hpp"
#include "lotsol/solvers/grid.hpp"
#include "lotsol/solvers/separable.hpp"

namespace lotsol::cli {

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

/// Lowers the declarative one-action model onto the lottery-problem
/// interface: quadratic payoff, linear pooled rows, no per-action rows.
inline LotteryProblem build_custom_problem(const CustomModelConfig& cm) {
  LotteryProblem p;
  p.actions = {Vec{0.0}};
  p.consumption_box = cm.box;
  p.payoff = [cm](int /*a*/, const Vec& c) {
    double acc = cm.payoff_constant;
    for (std::size_t r = 0; r < c.size(); ++r) {
      acc += cm.payoff_quadratic[r] * c[r] * c[r] + cm.payoff_linear[r] * c[r];
    }
    return acc;
  };
  for (std::size_t t = 0; t < cm.pooled_linear.size(); ++t) {
    const Vec row = cm.pooled_linear[t];
    const double cst = cm.pooled_constant[t];
    p.pooled_constraints.push_back([row, cst](int /*a*/, const Vec& c) {
      double acc = cst;
      for (std::size_t r = 0; r < c.size(); ++r) acc += row[r] * c[r];
      return acc;
    });
  }
  return p;
}

/**
 * Exact finite oracle for the custom model: one probability variable per
 * grid cell, expected pooled rows as inequalities, and the normalization row
 * as the single (last) equality. Refuses instances whose nonzero bound
 * exceeds the configured cap.
 */
inline lp::LpInstance build_custom_lp(const CustomModelConfig& cm, int grid_points,
                                      long long max_nonzeros) {
  const GridInnerSolver grid = GridInnerSolver::uniform(cm.box, grid_points);
  const std::size_t vars = grid.total_points();
  const std::size_t nnz_bound = vars * (cm.pooled_linear.size() + 1);
  if (nnz_bound > static_cast<std::size_t>(max_nonzeros)) {
    lp::MhLpSizes sizes;
    sizes.vars = static_cast<long>(vars);
    sizes.equalities = 1;
    sizes.inequalities = static_cast<long>(cm.pooled_linear.size());
    sizes.nonzero_bound = nnz_bound;
    throw lp::SizeCapExceeded(sizes, static_cast<std::size_t>(max_nonzeros));
  }

  const LotteryProblem problem = build_custom_problem(cm);
  const std::size_t dim = cm.box.size();

  lp::LpInstance inst;
  inst.num_vars = static_cast<int>(vars);
  inst.objective.resize(vars);
  inst.ineq_rows.resize(cm.pooled_linear.size());
  inst.ineq_rhs.assign(cm.pooled_linear.size(), 0.0);

  std::vector<std::size_t> idx(dim, 0);
  Vec c(dim);
  for (std::size_t v = 0; v < vars; ++v) {
    for (std::size_t r = 0; r < dim; ++r) c[r] = grid.coordinate_grids[r][idx[r]];
    inst.objective[v] = problem.payoff(0, c);
    for (std::size_t t = 0; t < cm.pooled_linear.size(); ++t) {
      inst.ineq_rows[t].push(static_cast<int>(v), pooled_value(problem, static_cast<int>(t), 0, c));
    }
    for (std::size_t r = dim; r-- > 0;) {
      if (++idx[r] < grid.coordinate_grids[r].size()) break;
      idx[r] = 0;
    }
  }

  lp::SparseRow norm;
  for (std::size_t v = 0; v < vars; ++v) norm.push(static_cast<int>(v), 1.0);
  inst.eq_rows.push_back(std::move(norm));
  inst.eq_rhs.push_back(1.0);
  inst.normalization_row = 0;
  inst.validate();
  return inst;
}

/// Owns whichever model the configuration selected and exposes the common
/// lottery-problem view.
struct PreparedRun {
  ModelKind model = ModelKind::moral_hazard;
  mh::MhProblem moral_hazard;
  tax::TaxProblem taxation;
  LotteryProblem custom;

  const LotteryProblem& problem() const {
    switch (model) {
      case ModelKind::moral_hazard: return moral_hazard.problem;
      case ModelKind::taxation: return taxation.problem;
      default: return custom;
    }
  }
};

inline PreparedRun prepare_run(const RunConfig& cfg) {
  PreparedRun pr;
  pr.model = cfg.model;
  switch (cfg.model) {
    case ModelKind::moral_hazard:
      pr.moral_hazard = mh::to_problem(cfg.moral_hazard);
      break;
    case ModelKind::taxation:
      pr.taxation = tax::to_problem(cfg.taxation.economy(), cfg.taxation.ic_mode);
      break;
    case ModelKind::custom:
      pr.custom = build_custom_problem(cfg.custom);
      break;
  }
  return pr;
}

inline IterateLog run_loop(const PreparedRun& pr, const RunConfig& cfg) {
  switch (cfg.model) {
    case ModelKind::moral_hazard: {
      const MultiplierState init = mh::initial_multipliers(pr.moral_hazard, cfg.mh_resource_lambda);
      const LoopOptions opts;
      if (cfg.inner == InnerKind::foc) {
        FocInnerSolver inner(pr.moral_hazard.problem, pr.moral_hazard.spec);
        return run_iteration_loop(pr.moral_hazard.problem, init, cfg.schedule, cfg.iterations,
                                  inner, opts);
      }
      const GridInnerSolver inner =
          GridInnerSolver::uniform(pr.moral_hazard.problem.consumption_box, cfg.grid_points);
      return run_iteration_loop(pr.moral_hazard.problem, init, cfg.schedule, cfg.iterations,
                                inner, opts);
    }
    case ModelKind::taxation: {
      const MultiplierState init =
          tax::initial_tax_multipliers(pr.taxation, cfg.taxation.resource_lambda);
      tax::TaxInnerSolver inner(pr.taxation);
      return run_iteration_loop(pr.taxation.problem, init, cfg.schedule, cfg.iterations, inner,
                                tax::default_tax_loop_options());
    }
    default: {
      const int m = static_cast<int>(cfg.custom.pooled_linear.size());
      const MultiplierState init = MultiplierState::zeros(m, 0, 1);
      const GridInnerSolver inner = GridInnerSolver::uniform(cfg.custom.box, cfg.grid_points);
      return run_iteration_loop(pr.custom, init, cfg.schedule, cfg.iterations, inner,
                                LoopOptions{});
    }
  }
}

struct SolveArtifacts {
  IterateLog log;
  LotterySolution lottery;
};

inline SolveArtifacts solve_run(const PreparedRun& pr, const RunConfig& cfg) {
  SolveArtifacts out;
  out.log = run_loop(pr, cfg);
  const std::pair<int, int> window = cfg.window ? *cfg.window : tail_window(out.log);
  out.lottery = construct_lottery(out.log, window.first, window.second, cfg.cluster_tol);
  out.lottery.eps_report = certify_eps(pr.problem(), out.lottery, out.log);
  return out;
}

template <class Fn>
int run_guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const lp::SizeCapExceeded& e) {
    err << "size-cap refusal: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

inline int cmd_solve(const RunConfig& cfg, std::ostream& out) {
  return detail::run_guarded(out, [&]() -> int {
    const auto t0 = std::chrono::steady_clock::now();
    const detail::PreparedRun pr = detail::prepare_run(cfg);
    const detail::SolveArtifacts run = detail::solve_run(pr, cfg);
    const double wall = detail::seconds_since(t0);

    const std::string hash = config_hash(cfg);
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);

    if (cfg.trajectory_stride > 0) {
      auto f = detail::open_out(dir / "trajectory.csv");
      write_trajectory_csv(f, run.log, hash, cfg.trajectory_stride);
    }
    {
      auto f = detail::open_out(dir / "lottery.json");
      f << lottery_to_json(run.lottery, pr.problem(), cfg).dump(2) << "\n";
    }
    {
      auto f = detail::open_out(dir / "certificate.json");
      f << certificate_to_json(*run.lottery.eps_report, hash).dump(2) << "\n";
    }

    if (cfg.model == ModelKind::taxation) {
      const tax::TaxEconomy econ = cfg.taxation.economy();
      const bool judd = cfg.taxation.calibration == "judd25";
      tax::Allocation benchmark;
      if (judd) benchmark = tax::judd25_deterministic_benchmark();
      {
        auto f = detail::open_out(dir / "marginals.csv");
        write_tax_marginals_csv(f, econ, run.lottery, cfg.cluster_tol, hash,
                                judd ? &benchmark : nullptr);
      }
      if (judd) {
        const tax::FirstBest fb = tax::first_best(econ);
        const double u_det = tax::allocation_welfare(econ, benchmark);
        const tax::WelfareAccount account =
            tax::welfare_account(econ, run.lottery.objective, u_det);
        auto f = detail::open_out(dir / "welfare.json");
        f << welfare_to_json(fb, account, hash).dump(2) << "\n";
        out << "welfare: lottery " << account.u_lottery << " (waste "
            << 100.0 * account.loss_lottery << "%), deterministic benchmark "
            << account.u_deterministic << " (waste " << 100.0 * account.loss_deterministic
            << "%), first-best " << account.u_first_best << "\n";
      }
    }

    out << "solve: model=" << to_string(cfg.model) << " iterations=" << cfg.iterations
        << " window=[" << run.lottery.k_start << "," << run.lottery.k_end << "]"
        << " atoms=" << run.lottery.atoms.size() << "\n";
    out << "objective=" << detail::fmt(run.lottery.objective)
        << " certified_eps=" << detail::fmt(run.lottery.eps_report->certified_eps)
        << " max_g_violation=" << detail::fmt(run.lottery.eps_report->max_g_violation) << "\n";
    if (cfg.model == ModelKind::moral_hazard) {
      for (std::size_t t = 0; t < run.lottery.atoms.size() && t < 5; ++t) {
        const LotteryAtom& atom = run.lottery.atoms[t];
        out << "  P(a=" << pr.problem().actions[static_cast<std::size_t>(atom.a_index)][0]
            << ") ~ " << atom.probability << " contract (";
        for (std::size_t r = 0; r < atom.c.size(); ++r) out << (r ? ", " : "") << atom.c[r];
        out << ")\n";
      }
    }
    out << "wrote " << (dir / "lottery.json").string() << " [config " << hash << "] in " << wall
        << "s\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

/**
 * Runs the canonical iteration (default schedule, round(100/spacing)
 * iterations, first-order inner solver) for each action spacing on the
 * ladder and reports wall time next to the oracle instance sizes. The
 * oracle is solved, and its time reported, only when enabled and under the
 * nonzero cap.
 */
inline int cmd_benchmark(const RunConfig& cfg, std::ostream& out) {
  return detail::run_guarded(out, [&]() -> int {
    if (cfg.model != ModelKind::moral_hazard) {
      throw ConfigError("benchmark: only the moral-hazard model has a performance ladder");
    }
    std::vector<BenchmarkRow> rows;
    out << "a_step  iterations  wall_s      lp_vars  lp_eq  lp_ineq  lp_nnz_bound  lp_solve_s\n";
    for (const double a_step : cfg.ladder) {
      mh::MoralHazardModel model = cfg.moral_hazard;
      model.a_step = a_step;

      BenchmarkRow row;
      row.a_step = a_step;
      row.iterations = mh::default_iterations(model);

      const auto t0 = std::chrono::steady_clock::now();
      const mh::MhProblem mhp = mh::to_problem(model);
      FocInnerSolver inner(mhp.problem, mhp.spec);
      const IterateLog log = run_iteration_loop(
          mhp.problem, mh::initial_multipliers(mhp, cfg.mh_resource_lambda),
          mh::default_schedule(model), row.iterations, inner, LoopOptions{});
      const std::pair<int, int> window = tail_window(log);
      const LotterySolution lottery =
          construct_lottery(log, window.first, window.second, cfg.cluster_tol);
      row.wall_seconds = detail::seconds_since(t0);

      const lp::MhLpSizes sizes = lp::mh_lp_sizes(model, cfg.oracle.c_step);
      row.lp_vars = sizes.vars;
      row.lp_equalities = sizes.equalities;
      row.lp_inequalities = sizes.inequalities;
      row.lp_nonzero_bound = sizes.nonzero_bound;
      row.lp_under_cap =
          sizes.nonzero_bound <= static_cast<std::size_t>(cfg.oracle.max_nonzeros);

      if (cfg.oracle.enabled && row.lp_under_cap) {
        lp::MhLpOptions lpo;
        lpo.c_step = cfg.oracle.c_step;
        lpo.max_nonzeros = static_cast<std::size_t>(cfg.oracle.max_nonzeros);
        lpo.comparison_scaling = cfg.oracle.comparison_scaling;
        const auto t1 = std::chrono::steady_clock::now();
        const lp::MhLp built = lp::build_mh_lp(model, lpo);
        const lp::SimplexResult res = lp::simplex_solve(built.instance);
        row.lp_solve_seconds = detail::seconds_since(t1);
        if (res.status != lp::SimplexStatus::Optimal) {
          throw std::runtime_error("benchmark: oracle did not reach an optimum at spacing " +
                                   std::to_string(a_step));
        }
        row.lp_solved = true;
        row.lp_optimum = res.objective;
      }

      char line[160];
      std::snprintf(line, sizeof line, "%-7.4g %-11d %-11.4g %-8ld %-6ld %-8ld %-13zu %s\n",
                    row.a_step, row.iterations, row.wall_seconds, row.lp_vars,
                    row.lp_equalities, row.lp_inequalities, row.lp_nonzero_bound,
                    row.lp_solved ? detail::fmt(row.lp_solve_seconds).c_str() : "-");
      out << line;
      rows.push_back(row);
    }

    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    auto f = detail::open_out(dir / "benchmark.csv");
    write_benchmark_csv(f, rows, config_hash(cfg));
    out << "wrote " << (dir / "benchmark.csv").string() << "\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

inline int cmd_compare(const RunConfig& cfg, std::ostream& out) {
  return detail::run_guarded(out, [&]() -> int {
    if (cfg.model == ModelKind::taxation) {
      throw ConfigError(
          "compare: no finite oracle assembly exists for the taxation model "
          "(its consumption grid would have to cover every type jointly)");
    }

    const std::string hash = config_hash(cfg);
    const std::filesystem::path dir(cfg.out_dir);
    lp::CompareReport report;

    if (cfg.model == ModelKind::moral_hazard) {
      lp::MhLpOptions lpo;
      lpo.c_step = cfg.oracle.c_step;
      lpo.max_nonzeros = static_cast<std::size_t>(cfg.oracle.max_nonzeros);
      lpo.comparison_scaling = cfg.oracle.comparison_scaling;
      const lp::MhLp built = lp::build_mh_lp(cfg.moral_hazard, lpo);
      const lp::SimplexResult lp_result = lp::simplex_solve(built.instance);
      if (lp_result.status != lp::SimplexStatus::Optimal) {
        throw std::runtime_error("compare: oracle finished without an optimum");
      }
      const detail::PreparedRun pr = detail::prepare_run(cfg);
      const detail::SolveArtifacts run = detail::solve_run(pr, cfg);
      report = lp::compare_oracle(built, lp_result, run.log, run.lottery);
    } else {
      const lp::LpInstance inst =
          detail::build_custom_lp(cfg.custom, cfg.grid_points, cfg.oracle.max_nonzeros);
      const lp::SimplexResult lp_result = lp::simplex_solve(inst);
      if (lp_result.status != lp::SimplexStatus::Optimal) {
        throw std::runtime_error("compare: oracle finished without an optimum");
      }
      const detail::PreparedRun pr = detail::prepare_run(cfg);
      const detail::SolveArtifacts run = detail::solve_run(pr, cfg);

      report.lp_optimum = lp_result.objective;
      report.min_dual_value = run.log.records.front().dual_value;
      for (const IterateRecord& rec : run.log.records) {
        report.min_dual_value = std::min(report.min_dual_value, rec.dual_value);
      }
      report.lottery_objective = run.lottery.objective;
      report.dual_gap = std::abs(report.lp_optimum - report.min_dual_value);
      report.objective_gap = std::abs(report.lp_optimum - report.lottery_objective);
      report.lp_action_marginal = {1.0};
      report.lottery_action_marginal = {1.0};
      report.action_marginal_max_diff = 0.0;

      // Mean consumption per coordinate under both measures (single action).
      const std::size_t dim = cfg.custom.box.size();
      const GridInnerSolver grid = GridInnerSolver::uniform(cfg.custom.box, cfg.grid_points);
      Vec lp_mean(dim, 0.0);
      std::vector<std::size_t> idx(dim, 0);
      for (std::size_t v = 0; v < lp_result.x.size(); ++v) {
        for (std::size_t r = 0; r < dim; ++r) {
          lp_mean[r] += lp_result.x[v] * grid.coordinate_grids[r][idx[r]];
        }
        for (std::size_t r = dim; r-- > 0;) {
          if (++idx[r] < grid.coordinate_grids[r].size()) break;
          idx[r] = 0;
        }
      }
      Vec lot_mean(dim, 0.0);
      for (const LotteryAtom& atom : run.lottery.atoms) {
        for (std::size_t r = 0; r < dim; ++r) lot_mean[r] += atom.probability * atom.c[r];
      }
      for (std::size_t r = 0; r < dim; ++r) {
        report.consumption_mean_max_diff =
            std::max(report.consumption_mean_max_diff, std::abs(lp_mean[r] - lot_mean[r]));
      }
    }

    std::filesystem::create_directories(dir);
    auto f = detail::open_out(dir / "compare.json");
    f << compare_to_json(report, hash).dump(2) << "\n";

    out << "compare: lp_optimum=" << detail::fmt(report.lp_optimum)
        << " min_dual=" << detail::fmt(report.min_dual_value)
        << " lottery=" << detail::fmt(report.lottery_objective) << "\n";
    out << "gaps: dual=" << detail::fmt(report.dual_gap)
        << " objective=" << detail::fmt(report.objective_gap)
        << " action_marginal=" << detail::fmt(report.action_marginal_max_diff)
        << " consumption_mean=" << detail::fmt(report.consumption_mean_max_diff) << "\n";
    out << "wrote " << (dir / "compare.json").string() << " [config " << hash << "]\n";
    return 0;
  });
}

// ---------------------------------------------------------------------------
// lp
// ---------------------------------------------------------------------------

/// Builds the oracle instance, reports its sizes, and exports it in fixed
/// MPS format; solves it too when the oracle is enabled.
inline int cmd_lp(const RunConfig& cfg, std::ostream& out) {
  return detail::run_guarded(out, [&]() -> int {
    if (cfg.model == ModelKind::taxation) {
      throw ConfigError("lp: no finite oracle assembly exists for the taxation model");
    }

    const std::string hash = config_hash(cfg);
    const std::filesystem::path dir(cfg.out_dir);
    lp::LpInstance instance;

    if (cfg.model == ModelKind::moral_hazard) {
      const lp::MhLpSizes sizes = lp::mh_lp_sizes(cfg.moral_hazard, cfg.oracle.c_step);
      out << "lp sizes: vars=" << sizes.vars << " eq=" << sizes.equalities
          << " ineq=" << sizes.inequalities << " nonzero_bound=" << sizes.nonzero_bound << "\n";
      lp::MhLpOptions lpo;
      lpo.c_step = cfg.oracle.c_step;
      lpo.max_nonzeros = static_cast<std::size_t>(cfg.oracle.max_nonzeros);
      lpo.comparison_scaling = cfg.oracle.comparison_scaling;
      instance = lp::build_mh_lp(cfg.moral_hazard, lpo).instance;
    } else {
      instance = detail::build_custom_lp(cfg.custom, cfg.grid_points, cfg.oracle.max_nonzeros);
      out << "lp sizes: vars=" << instance.num_vars << " eq=" << instance.eq_rows.size()
          << " ineq=" << instance.ineq_rows.size() << " nonzeros=" << instance.nonzeros()
          << "\n";
    }

    std::filesystem::create_directories(dir);
    {
      auto f = detail::open_out(dir / "lp.mps");
      f << "* config_hash=" << hash << "\n";
      lp::write_mps(f, instance, "LOTTERY");
    }
    out << "wrote " << (dir / "lp.mps").string() << " [config " << hash << "]\n";

    if (cfg.oracle.enabled) {
      const lp::SimplexResult res = lp::simplex_solve(instance);
      if (res.status != lp::SimplexStatus::Optimal) {
        throw std::runtime_error("lp: oracle finished without an optimum");
      }
      out << "lp optimum=" << detail::fmt(res.objective) << "\n";
    }
    return 0;
  });
}

}  // namespace lotsol::cli
