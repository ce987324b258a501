// Tests for the command-line front-end: configuration parsing and rejection
// diagnostics, canonical hashing, preset consistency, artifact round-trips
// and determinism, subcommand exit codes, the declarative one-action model
// against its closed form, and the installed binary end to end.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <utility>

#include <json.hpp>

#include "lotsol/cli/commands.hpp"
#include "lotsol/cli/config.hpp"
#include "lotsol/lp/simplex.hpp"
#include "lotsol/solution.hpp"

namespace {

namespace fs = std::filesystem;
using njson = nlohmann::json;
using lotsol::cli::ConfigError;
using lotsol::cli::config_hash;
using lotsol::cli::InnerKind;
using lotsol::cli::load_preset;
using lotsol::cli::ModelKind;
using lotsol::cli::parse_run_config_text;
using lotsol::cli::parse_window_spec;
using lotsol::cli::RunConfig;

RunConfig parse(const std::string& text) { return parse_run_config_text(text, "test"); }

/// Parses text expecting rejection; returns the diagnostic for inspection.
std::string rejection(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  FAIL("expected the configuration to be rejected");
  return {};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the system temp root.
fs::path scratch_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("lotsol_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LOTSOL_CLI_BIN) +
                          (args.empty() ? "" : " " + args) + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("rejected configurations name the offending field") {
  REQUIRE(contains(rejection(R"({"model":"moral-hazard","moral_hazard":{"a_step":0.0}})"),
                   "moral_hazard"));
  REQUIRE(contains(rejection(R"({"model":"moral-hazard","moral_hazard":{"a_step":0.0}})"),
                   "a_step"));
  REQUIRE(contains(rejection(R"({"model":"moral-hazard","bogus":1})"),
                   "bogus: unknown field"));
  REQUIRE(contains(rejection(R"({"model":"moral-hazard","moral_hazard":{"typo":1}})"),
                   "moral_hazard.typo"));
  REQUIRE(contains(rejection(R"({})"), "model: required"));
  REQUIRE(contains(rejection(R"({"model":"nonsense"})"), "unknown model 'nonsense'"));
  REQUIRE(contains(rejection(R"({"model":"taxation","moral_hazard":{}})"), "not allowed"));
  REQUIRE(contains(rejection(R"({"model":"taxation","inner":"grid"})"),
                   "per-type maximizer"));
  REQUIRE(contains(rejection(R"({"model":"taxation","oracle":{"enabled":true}})"),
                   "oracle.enabled"));
  REQUIRE(contains(rejection(R"({"model":"custom"})"), "custom: required"));
  const std::string custom_foc = R"({
    "model": "custom",
    "custom": {"box": [[0.0, 1.0]], "payoff": {"linear": [1.0]},
               "pooled": [{"linear": [1.0], "constant": -0.5}]},
    "inner": "foc"
  })";
  REQUIRE(contains(rejection(custom_foc), "only the grid maximizer"));
  REQUIRE(contains(rejection(R"({"model":"moral-hazard","window":[5,2]})"),
                   "window"));
  REQUIRE(contains(rejection(R"({"model":"moral-hazard","window":[0,4]})"),
                   "k_start"));
  REQUIRE(contains(rejection(R"({"model":"moral-hazard","iterations":10,"window":[5,20]})"),
                   "k_end exceeds"));
  REQUIRE(contains(rejection(R"({"model":"moral-hazard","iterations":0})"),
                   "iterations: must be >= 1"));
  REQUIRE(contains(rejection(R"({"model":"moral-hazard","schedule":{"exponent":0.3}})"),
                   "schedule"));

  // Syntax errors carry the origin and the parser's position.
  try {
    parse_run_config_text("{ not json", "some/file.json");
    FAIL("expected a syntax rejection");
  } catch (const ConfigError& e) {
    REQUIRE(contains(e.what(), "some/file.json"));
    REQUIRE(contains(e.what(), "line"));
  }
}

TEST_CASE("defaults resolve per model kind") {
  const RunConfig mh = parse(R"({"model":"moral-hazard"})");
  REQUIRE(mh.model == ModelKind::moral_hazard);
  REQUIRE(mh.schedule.scale == 1.0);
  REQUIRE(mh.schedule.offset == Catch::Approx(1600.0).margin(1e-9));
  REQUIRE(mh.schedule.exponent == 0.8);
  REQUIRE(mh.iterations == 4000);
  REQUIRE(mh.cluster_tol == 1e-2);
  REQUIRE(mh.inner == InnerKind::foc);
  REQUIRE_FALSE(mh.window.has_value());
  REQUIRE(mh.out_dir == "out");
  REQUIRE(mh.trajectory_stride == 1);
  REQUIRE(mh.ladder == std::vector<double>{0.2, 0.1, 0.05, 0.025});
  REQUIRE_FALSE(mh.oracle.enabled);
  REQUIRE(mh.oracle.c_step == 0.01);
  REQUIRE(mh.oracle.max_nonzeros == 2'000'000);

  const RunConfig tax = parse(R"({"model":"taxation"})");
  REQUIRE(tax.schedule.scale == 0.5);
  REQUIRE(tax.schedule.offset == 100.0);
  REQUIRE(tax.schedule.exponent == 0.8);
  REQUIRE(tax.iterations == 200000);
  REQUIRE(tax.cluster_tol == 2e-2);

  const RunConfig cust = parse(R"({
    "model": "custom",
    "custom": {"box": [[0.0, 1.0]], "payoff": {"linear": [1.0]},
               "pooled": [{"linear": [1.0], "constant": -0.5}]}
  })");
  REQUIRE(cust.schedule.scale == 1.0);
  REQUIRE(cust.schedule.offset == 10.0);
  REQUIRE(cust.iterations == 2000);
  REQUIRE(cust.inner == InnerKind::grid);
  REQUIRE(cust.grid_points == 101);
  REQUIRE(cust.custom.dimension() == 1);
  REQUIRE(cust.custom.num_pooled() == 1);
}

TEST_CASE("spelling out defaults leaves the canonical form and hash unchanged") {
  const RunConfig bare = parse(R"({"model":"moral-hazard"})");
  // Everything except the schedule (whose default offset is not a round
  // decimal) spelled out at its default value.
  const RunConfig spelled = parse(R"({
    "model": "moral-hazard",
    "moral_hazard": {
      "a_lo": 0.05, "a_step": 0.025, "a_hi": 1.95,
      "outputs": [0.5, 1.5], "c_min": 0.0, "c_max": 2.0,
      "alpha": 0.5, "kappa": 0.8, "a_bar": 2.0, "beta": 0.5,
      "ic_scaling": true, "resource_lambda": 0.5
    },
    "iterations": 4000,
    "window": null,
    "cluster_tol": 0.01,
    "inner": "foc",
    "grid_points": 101,
    "oracle": {"enabled": false, "c_step": 0.01, "max_nonzeros": 2000000,
               "comparison_scaling": false},
    "out_dir": "out",
    "trajectory_stride": 1,
    "ladder": [0.2, 0.1, 0.05, 0.025]
  })");
  REQUIRE(lotsol::cli::canonical_json(bare).dump() ==
          lotsol::cli::canonical_json(spelled).dump());
  REQUIRE(config_hash(bare) == config_hash(spelled));

  // The canonical document leads with the model selector.
  REQUIRE(lotsol::cli::canonical_json(bare).dump().rfind("{\"model\":", 0) == 0);

  // Hashes are 16 lowercase hex digits and move when the run changes.
  const std::string h = config_hash(bare);
  REQUIRE(h.size() == 16);
  for (char ch : h) REQUIRE(((ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f')));
  REQUIRE(config_hash(parse(R"({"model":"moral-hazard","iterations":4001})")) != h);
  REQUIRE(config_hash(parse(R"({"model":"taxation"})")) != h);
}

TEST_CASE("built-in presets mirror the files shipped in presets/") {
  const auto& presets = lotsol::cli::builtin_presets();
  REQUIRE(presets.size() == 6);
  for (const auto& [name, text] : presets) {
    INFO("preset " << name);
    REQUIRE(text == slurp(fs::path(LOTSOL_PRESET_DIR) / (name + ".json")));
    REQUIRE_NOTHROW(load_preset(name));
  }
  try {
    load_preset("nope");
    FAIL("expected an unknown-preset rejection");
  } catch (const ConfigError& e) {
    REQUIRE(contains(e.what(), "available:"));
    REQUIRE(contains(e.what(), "tiny"));
  }
}

TEST_CASE("window override specs parse or reject") {
  REQUIRE(parse_window_spec("3800:4000") == std::pair<int, int>(3800, 4000));
  REQUIRE(parse_window_spec("1:1") == std::pair<int, int>(1, 1));
  for (const char* bad : {"5:2", "0:4", "a:b", "3:", ":4", "3:4x", "34"}) {
    INFO("spec " << bad);
    REQUIRE_THROWS_AS(parse_window_spec(bad), ConfigError);
  }
}

TEST_CASE("serialized lotteries re-certify to the same numbers") {
  const RunConfig cfg = load_preset("tiny");
  const lotsol::cli::detail::PreparedRun pr = lotsol::cli::detail::prepare_run(cfg);
  const lotsol::cli::detail::SolveArtifacts run = lotsol::cli::detail::solve_run(pr, cfg);
  REQUIRE(run.lottery.eps_report.has_value());

  const std::string text = lotsol::cli::lottery_to_json(run.lottery, pr.problem(), cfg).dump(2);
  const lotsol::LotterySolution parsed = lotsol::cli::lottery_from_json(njson::parse(text));

  REQUIRE(parsed.k_start == run.lottery.k_start);
  REQUIRE(parsed.k_end == run.lottery.k_end);
  REQUIRE(parsed.objective == run.lottery.objective);
  REQUIRE(parsed.atoms.size() == run.lottery.atoms.size());
  for (std::size_t t = 0; t < parsed.atoms.size(); ++t) {
    REQUIRE(parsed.atoms[t].a_index == run.lottery.atoms[t].a_index);
    REQUIRE(parsed.atoms[t].c == run.lottery.atoms[t].c);
    REQUIRE(parsed.atoms[t].probability == run.lottery.atoms[t].probability);
  }

  const lotsol::EpsOptimalityReport before = *run.lottery.eps_report;
  const lotsol::EpsOptimalityReport after =
      lotsol::certify_eps(pr.problem(), parsed, run.log);
  REQUIRE(after.max_g_violation == Catch::Approx(before.max_g_violation).margin(1e-12));
  REQUIRE(after.max_h_violation == Catch::Approx(before.max_h_violation).margin(1e-12));
  REQUIRE(after.dual_upper_bound == Catch::Approx(before.dual_upper_bound).margin(1e-12));
  REQUIRE(after.duality_gap_bound == Catch::Approx(before.duality_gap_bound).margin(1e-12));
  REQUIRE(after.certified_eps == Catch::Approx(before.certified_eps).margin(1e-12));
  REQUIRE(after.analytic_g_bounds == before.analytic_g_bounds);

  // The certificate document itself also round-trips exactly.
  const lotsol::EpsOptimalityReport rt = lotsol::cli::certificate_from_json(
      njson::parse(lotsol::cli::certificate_to_json(before, "feedbeef00000000").dump()));
  REQUIRE(rt.max_g_violation == before.max_g_violation);
  REQUIRE(rt.max_h_violation == before.max_h_violation);
  REQUIRE(rt.dual_upper_bound == before.dual_upper_bound);
  REQUIRE(rt.duality_gap_bound == before.duality_gap_bound);
  REQUIRE(rt.certified_eps == before.certified_eps);
  REQUIRE(rt.analytic_g_bounds == before.analytic_g_bounds);
}

TEST_CASE("solve writes identical artifacts on identical runs") {
  const fs::path dir = scratch_dir("solve_determinism");
  RunConfig cfg = load_preset("tiny");
  cfg.out_dir = dir.string();

  std::ostringstream out1;
  REQUIRE(lotsol::cli::cmd_solve(cfg, out1) == 0);
  REQUIRE(contains(out1.str(), "solve: model=moral-hazard"));

  const std::string traj = slurp(dir / "trajectory.csv");
  const std::string lottery = slurp(dir / "lottery.json");
  const std::string cert = slurp(dir / "certificate.json");

  const std::string hash = config_hash(cfg);
  REQUIRE(traj.rfind("# config_hash=" + hash, 0) == 0);
  REQUIRE(njson::parse(lottery).at("config_hash").get<std::string>() == hash);
  REQUIRE(njson::parse(cert).at("config_hash").get<std::string>() == hash);

  std::ostringstream out2;
  REQUIRE(lotsol::cli::cmd_solve(cfg, out2) == 0);
  REQUIRE(slurp(dir / "trajectory.csv") == traj);
  REQUIRE(slurp(dir / "lottery.json") == lottery);
  REQUIRE(slurp(dir / "certificate.json") == cert);

  fs::remove_all(dir);
}

TEST_CASE("benchmark with an empty ladder writes only the table header") {
  const fs::path dir = scratch_dir("benchmark_empty");
  RunConfig cfg = parse(R"({"model":"moral-hazard","ladder":[]})");
  cfg.out_dir = dir.string();

  std::ostringstream out;
  REQUIRE(lotsol::cli::cmd_benchmark(cfg, out) == 0);
  REQUIRE(contains(out.str(), "a_step"));

  const std::string csv = slurp(dir / "benchmark.csv");
  REQUIRE(csv.rfind("# config_hash=", 0) == 0);
  REQUIRE(contains(csv, "a_step,iterations,wall_seconds"));
  // Exactly two lines: the hash comment and the column header.
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 2);

  fs::remove_all(dir);
}

TEST_CASE("oracle subcommands refuse what they cannot assemble") {
  const fs::path dir = scratch_dir("oracle_refusals");
  RunConfig tax = parse(R"({"model":"taxation"})");
  tax.out_dir = dir.string();

  std::ostringstream out;
  REQUIRE(lotsol::cli::cmd_compare(tax, out) == 2);
  REQUIRE(contains(out.str(), "config error"));
  std::ostringstream out_lp;
  REQUIRE(lotsol::cli::cmd_lp(tax, out_lp) == 2);

  RunConfig capped = load_preset("tiny");
  capped.out_dir = dir.string();
  capped.oracle.max_nonzeros = 10;
  std::ostringstream out_cap;
  REQUIRE(lotsol::cli::cmd_compare(capped, out_cap) == 4);
  REQUIRE(contains(out_cap.str(), "size-cap refusal"));

  fs::remove_all(dir);
}

TEST_CASE("compare reports the oracle gaps for the five-action run") {
  const fs::path dir = scratch_dir("compare_tiny");
  RunConfig cfg = load_preset("tiny");
  cfg.out_dir = dir.string();

  std::ostringstream out;
  REQUIRE(lotsol::cli::cmd_compare(cfg, out) == 0);

  const njson rep = njson::parse(slurp(dir / "compare.json"));
  REQUIRE(rep.at("config_hash").get<std::string>() == config_hash(cfg));
  REQUIRE(rep.at("lp_optimum").get<double>() ==
          Catch::Approx(1.8378963861309068).margin(1e-9));
  REQUIRE(rep.at("min_dual_value").get<double>() ==
          Catch::Approx(1.8379353373728093).margin(1e-9));
  REQUIRE(rep.at("dual_gap").get<double>() <= 1e-2);
  REQUIRE(rep.at("objective_gap").get<double>() <= 1e-2);

  fs::remove_all(dir);
}

TEST_CASE("lp export stamps the hash and honors the solve flag") {
  const fs::path dir = scratch_dir("lp_export");
  RunConfig cfg = load_preset("tiny");  // oracle enabled, c_step 0.1
  cfg.out_dir = dir.string();

  std::ostringstream out;
  REQUIRE(lotsol::cli::cmd_lp(cfg, out) == 0);
  REQUIRE(contains(out.str(), "lp sizes: vars=210"));
  REQUIRE(contains(out.str(), "lp optimum="));

  const std::string mps = slurp(dir / "lp.mps");
  REQUIRE(mps.rfind("* config_hash=" + config_hash(cfg), 0) == 0);
  REQUIRE(contains(mps, "OBJSENSE"));
  REQUIRE(contains(mps, "ENDATA"));

  RunConfig convex = load_preset("convex");
  convex.out_dir = dir.string();
  std::ostringstream out2;
  REQUIRE(lotsol::cli::cmd_lp(convex, out2) == 0);
  REQUIRE(contains(out2.str(), "lp sizes: vars=101"));

  fs::remove_all(dir);
}

TEST_CASE("declarative quadratic model reaches its closed-form optimum") {
  // max -(c - 0.7)^2 subject to c <= 0.5 on [0, 1]: the constrained optimum
  // is c* = 0.5, payoff -0.04, multiplier 2 (0.7 - 0.5) = 0.4, and the dual
  // is lambda^2 / 4 - 0.2 lambda while the inner maximum stays interior.
  const RunConfig cfg = load_preset("convex");
  const lotsol::cli::detail::PreparedRun pr = lotsol::cli::detail::prepare_run(cfg);
  const lotsol::cli::detail::SolveArtifacts run = lotsol::cli::detail::solve_run(pr, cfg);

  REQUIRE(run.lottery.atoms.size() == 1);
  REQUIRE(run.lottery.atoms[0].a_index == 0);
  REQUIRE(run.lottery.atoms[0].c[0] == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(run.lottery.atoms[0].probability == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(run.lottery.objective == Catch::Approx(-0.04).margin(1e-9));

  // The multiplier path freezes once the grid maximizer returns the
  // feasible point exactly, which happens for multipliers in [0.39, 0.41].
  const double lam_final = run.log.final_multipliers.lambda[0];
  REQUIRE(lam_final >= 0.39 - 1e-9);
  REQUIRE(lam_final <= 0.41 + 1e-9);

  // Every dual value matches the analytic dual at the replayed multiplier up
  // to the grid's quantization error (half-step squared = 2.5e-5).
  double lam = run.log.initial_multipliers.lambda[0];
  REQUIRE(lam == 0.0);
  for (const lotsol::IterateRecord& rec : run.log.records) {
    REQUIRE(rec.g.size() == 1);
    const double analytic = lam * lam / 4.0 - 0.2 * lam;
    REQUIRE(rec.dual_value == Catch::Approx(analytic).margin(5e-5));
    const double next = lam + rec.mu * rec.g[0];
    lam = next > 0.0 ? next : 0.0;
  }
  REQUIRE(lam == lam_final);

  // The tightest dual value sits at the analytic saddle value.
  REQUIRE(run.lottery.eps_report.has_value());
  REQUIRE(run.lottery.eps_report->dual_upper_bound ==
          Catch::Approx(-0.04).margin(1e-4));

  // The default window is a tail, so no telescoping bounds; rebuilding over
  // the full history produces them and the certificate respects the bound.
  REQUIRE(run.lottery.eps_report->analytic_g_bounds.empty());
  const lotsol::LotterySolution full =
      lotsol::construct_lottery(run.log, 1, run.log.n_iters, cfg.cluster_tol);
  const lotsol::EpsOptimalityReport full_rep =
      lotsol::certify_eps(pr.problem(), full, run.log);
  REQUIRE(full_rep.analytic_g_bounds.size() == 1);
  REQUIRE(full_rep.analytic_g_bounds[0] ==
          Catch::Approx(lam_final / run.log.sum_mu).margin(1e-15));
  REQUIRE(full_rep.max_g_violation <= full_rep.analytic_g_bounds[0] + 1e-10);
}

TEST_CASE("declarative model LP matches the grid and the closed form") {
  const RunConfig cfg = load_preset("convex");
  const lotsol::lp::LpInstance inst = lotsol::cli::detail::build_custom_lp(
      cfg.custom, cfg.grid_points, cfg.oracle.max_nonzeros);

  REQUIRE(inst.num_vars == 101);
  REQUIRE(inst.eq_rows.size() == 1);
  REQUIRE(inst.normalization_row == 0);
  REQUIRE(inst.ineq_rows.size() == 1);

  // Objective entries are the payoff at each grid point.
  REQUIRE(inst.objective[0] == Catch::Approx(-0.49).margin(1e-12));
  REQUIRE(inst.objective[50] == Catch::Approx(-0.04).margin(1e-12));
  REQUIRE(inst.objective[100] == Catch::Approx(-0.09).margin(1e-12));

  // Constraint entries are c - 0.5; the zero at the midpoint is dropped.
  auto coef_at = [&](int col) -> double {
    const lotsol::lp::SparseRow& row = inst.ineq_rows[0];
    for (std::size_t t = 0; t < row.cols.size(); ++t) {
      if (row.cols[t] == col) return row.vals[t];
    }
    return 0.0;
  };
  REQUIRE(coef_at(0) == Catch::Approx(-0.5).margin(1e-15));
  REQUIRE(coef_at(100) == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(coef_at(50) == 0.0);

  const lotsol::lp::SimplexResult res = lotsol::lp::simplex_solve(inst);
  REQUIRE(res.status == lotsol::lp::SimplexStatus::Optimal);
  REQUIRE(res.objective == Catch::Approx(-0.04).margin(1e-9));

  // The cap applies to this assembly too and reports its arithmetic.
  try {
    lotsol::cli::detail::build_custom_lp(cfg.custom, cfg.grid_points, 10);
    FAIL("expected a size-cap refusal");
  } catch (const lotsol::lp::SizeCapExceeded& e) {
    REQUIRE(e.sizes().vars == 101);
    REQUIRE(e.sizes().equalities == 1);
    REQUIRE(e.sizes().inequalities == 1);
    REQUIRE(e.sizes().nonzero_bound == 202);
    REQUIRE(e.cap() == 10);
  }
}

TEST_CASE("the installed binary maps outcomes to exit codes") {
  const fs::path dir = scratch_dir("binary_end_to_end");

  REQUIRE(run_cli("solve --preset tiny --out " + (dir / "a").string()) == 0);
  REQUIRE(fs::exists(dir / "a" / "lottery.json"));
  REQUIRE(fs::exists(dir / "a" / "certificate.json"));

  REQUIRE(run_cli("solve --preset nosuch") == 2);
  REQUIRE(run_cli("solve --config /nonexistent/run.json") == 2);
  REQUIRE(run_cli("solve --preset tiny --config x.json") == 2);
  REQUIRE(run_cli("solve --bogus-flag") == 2);
  REQUIRE(run_cli("solve") == 2);  // neither --config nor --preset
  REQUIRE(run_cli("") == 2);       // missing subcommand

  // Overrides: shrink the run, then re-window it.
  REQUIRE(run_cli("solve --preset example1 --iters 10 --window 2:5 --out " +
                  (dir / "b").string()) == 0);
  const njson lot = njson::parse(slurp(dir / "b" / "lottery.json"));
  REQUIRE(lot.at("k_start").get<int>() == 2);
  REQUIRE(lot.at("k_end").get<int>() == 5);

  REQUIRE(run_cli("benchmark --preset tiny --ladder 0.475 --out " +
                  (dir / "c").string()) == 0);
  const std::string csv = slurp(dir / "c" / "benchmark.csv");
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);
  REQUIRE(contains(csv, "true"));  // the tiny oracle fits under its cap

  fs::remove_all(dir);
}
