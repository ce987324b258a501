#pragma once

/**
 * JSON run configuration for the command-line front-end.
 *
 * A run is a single JSON document: it selects one of three model front-ends
 * (moral-hazard, taxation, custom), the multiplier step schedule, iteration
 * count, lottery window and clustering tolerance, the inner maximizer, the
 * optional linear-programming oracle, and output options.  Unset fields fall
 * back to model-specific defaults, and parsing resolves everything, so a
 * RunConfig is always fully specified.
 *
 * Every artifact the tools emit carries a 64-bit FNV-1a hash of the
 * canonical serialization of the resolved configuration; two documents that
 * resolve to the same run hash (and serialize) identically whether defaults
 * were spelled out or omitted.
 */

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lotsol/loop.hpp"
#include "lotsol/models/moral_hazard.hpp"
#include "lotsol/models/taxation.hpp"
#include "lotsol/problem.hpp"

namespace lotsol::cli {

/// Configuration rejection with a field-path diagnostic. Tools map it to
/// exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { moral_hazard, taxation, custom };
enum class InnerKind { foc, grid };

inline const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::moral_hazard: return "moral-hazard";
    case ModelKind::taxation: return "taxation";
    default: return "custom";
  }
}

inline const char* to_string(InnerKind k) { return k == InnerKind::foc ? "foc" : "grid"; }

/// Linear-programming oracle options (compare/lp subcommands, and the
/// optional solve column of the benchmark table).
struct OracleConfig {
  bool enabled = false;
  double c_step = 0.01;                  // consumption grid spacing
  long long max_nonzeros = 2'000'000;    // refuse builds above this
  bool comparison_scaling = false;       // rescale incentive rows like the iteration
};

/// Declarative one-action model: concave quadratic payoff and linear pooled
/// constraints over a box, the smallest shape with a known closed-form
/// optimum. Payoff sum_r (quadratic_r c_r^2 + linear_r c_r) + constant;
/// pooled row t is sum_r linear_{t,r} c_r + constant_t <= 0.
struct CustomModelConfig {
  std::vector<Interval> box;
  Vec payoff_quadratic;
  Vec payoff_linear;
  double payoff_constant = 0.0;
  std::vector<Vec> pooled_linear;
  Vec pooled_constant;

  int dimension() const { return static_cast<int>(box.size()); }
  int num_pooled() const { return static_cast<int>(pooled_linear.size()); }
};

/// Taxation economy selector: a named calibration or an explicit type list.
struct TaxationConfig {
  std::string calibration = "judd25";  // judd25 | equal-eta | diagonal5 | explicit
  int n_types = 5;                     // equal-eta only
  double eta = 0.5;                    // equal-eta only
  std::vector<tax::TypeSpec> types;    // explicit only
  tax::IcMode ic_mode = tax::IcMode::full;
  double c_min = 1e-3;
  double c_max = 10.0;
  double ell_max = 1.2;
  double resource_lambda = 0.5;        // initial resource multiplier

  tax::TaxEconomy economy() const {
    tax::TaxEconomy econ;
    if (calibration == "judd25") {
      econ = tax::TaxEconomy::judd25();
    } else if (calibration == "equal-eta") {
      econ = tax::TaxEconomy::equal_eta(n_types, eta);
    } else if (calibration == "diagonal5") {
      econ = tax::TaxEconomy::diagonal5();
    } else if (calibration == "explicit") {
      econ.types = types;
    } else {
      throw ConfigError("config: taxation.calibration: unknown calibration '" + calibration +
                        "' (expected judd25, equal-eta, diagonal5, or explicit)");
    }
    econ.c_min = c_min;
    econ.c_max = c_max;
    econ.ell_max = ell_max;
    econ.validate();
    return econ;
  }
};

/**
 * Fully resolved run description. Produced by parse_run_config /
 * load_preset; every field holds its effective value.
 */
struct RunConfig {
  ModelKind model = ModelKind::moral_hazard;

  mh::MoralHazardModel moral_hazard{};
  double mh_resource_lambda = 0.5;

  TaxationConfig taxation{};
  CustomModelConfig custom{};

  StepSchedule schedule{};
  int iterations = 0;
  std::optional<std::pair<int, int>> window;  // nullopt = final 5% of the run
  double cluster_tol = 1e-2;
  InnerKind inner = InnerKind::foc;
  int grid_points = 101;  // per coordinate, grid inner solver and custom oracle
  OracleConfig oracle{};
  std::string out_dir = "out";
  int trajectory_stride = 1;  // 0 skips the trajectory file
  std::vector<double> ladder{0.2, 0.1, 0.05, 0.025};
};

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char byte : text) {
    hash ^= byte;
    hash *= 1099511628211ull;
  }
  return hash;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

using njson = nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& message) {
  throw ConfigError("config: " + path + ": " + message);
}

inline void require_object(const njson& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

/// Rejects keys outside `allowed` so typos surface as errors, naming the
/// offending field.
inline void check_keys(const njson& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) fail(path.empty() ? item.key() : path + "." + item.key(), "unknown field");
  }
}

inline double as_double(const njson& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline double as_finite(const njson& j, const std::string& path) {
  const double v = as_double(j, path);
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

inline int as_int(const njson& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < -2'000'000'000 || v > 2'000'000'000) fail(path, "integer out of range");
  return static_cast<int>(v);
}

inline bool as_bool(const njson& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

inline std::string as_string(const njson& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline Vec as_vec(const njson& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  Vec out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_finite(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

template <class Fn>
void with_field(const njson& obj, const char* key, Fn&& fn) {
  auto it = obj.find(key);
  if (it != obj.end()) fn(*it);
}

inline void parse_moral_hazard(const njson& obj, RunConfig& cfg) {
  require_object(obj, "moral_hazard");
  check_keys(obj, "moral_hazard",
             {"a_lo", "a_step", "a_hi", "outputs", "c_min", "c_max", "alpha", "kappa", "a_bar",
              "beta", "ic_scaling", "resource_lambda"});
  mh::MoralHazardModel& m = cfg.moral_hazard;
  with_field(obj, "a_lo", [&](const njson& j) { m.a_lo = as_finite(j, "moral_hazard.a_lo"); });
  with_field(obj, "a_step",
             [&](const njson& j) { m.a_step = as_finite(j, "moral_hazard.a_step"); });
  with_field(obj, "a_hi", [&](const njson& j) { m.a_hi = as_finite(j, "moral_hazard.a_hi"); });
  with_field(obj, "outputs",
             [&](const njson& j) { m.outputs = as_vec(j, "moral_hazard.outputs"); });
  with_field(obj, "c_min", [&](const njson& j) { m.c_min = as_finite(j, "moral_hazard.c_min"); });
  with_field(obj, "c_max", [&](const njson& j) { m.c_max = as_finite(j, "moral_hazard.c_max"); });
  with_field(obj, "alpha", [&](const njson& j) { m.alpha = as_finite(j, "moral_hazard.alpha"); });
  with_field(obj, "kappa", [&](const njson& j) { m.kappa = as_finite(j, "moral_hazard.kappa"); });
  with_field(obj, "a_bar", [&](const njson& j) { m.a_bar = as_finite(j, "moral_hazard.a_bar"); });
  with_field(obj, "beta", [&](const njson& j) { m.beta = as_finite(j, "moral_hazard.beta"); });
  with_field(obj, "ic_scaling",
             [&](const njson& j) { m.ic_scaling = as_bool(j, "moral_hazard.ic_scaling"); });
  with_field(obj, "resource_lambda", [&](const njson& j) {
    cfg.mh_resource_lambda = as_finite(j, "moral_hazard.resource_lambda");
    if (cfg.mh_resource_lambda < 0.0) fail("moral_hazard.resource_lambda", "must be >= 0");
  });
  try {
    m.validate();
  } catch (const std::exception& e) {
    fail("moral_hazard", e.what());
  }
}

inline void parse_taxation(const njson& obj, RunConfig& cfg) {
  require_object(obj, "taxation");
  check_keys(obj, "taxation",
             {"calibration", "n_types", "eta", "types", "ic_mode", "c_min", "c_max", "ell_max",
              "resource_lambda"});
  TaxationConfig& t = cfg.taxation;
  with_field(obj, "calibration",
             [&](const njson& j) { t.calibration = as_string(j, "taxation.calibration"); });
  with_field(obj, "n_types", [&](const njson& j) {
    t.n_types = as_int(j, "taxation.n_types");
    if (t.n_types < 1) fail("taxation.n_types", "must be >= 1");
  });
  with_field(obj, "eta", [&](const njson& j) {
    t.eta = as_finite(j, "taxation.eta");
    if (!(t.eta > 0.0)) fail("taxation.eta", "must be > 0");
  });
  with_field(obj, "types", [&](const njson& j) {
    if (!j.is_array() || j.empty()) fail("taxation.types", "expected a non-empty array");
    t.types.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string path = "taxation.types[" + std::to_string(i) + "]";
      require_object(j[i], path);
      check_keys(j[i], path, {"w", "eta", "psi", "omega"});
      tax::TypeSpec spec;
      with_field(j[i], "w", [&](const njson& f) { spec.w = as_finite(f, path + ".w"); });
      with_field(j[i], "eta", [&](const njson& f) { spec.eta = as_finite(f, path + ".eta"); });
      with_field(j[i], "psi", [&](const njson& f) { spec.psi = as_finite(f, path + ".psi"); });
      with_field(j[i], "omega",
                 [&](const njson& f) { spec.omega = as_finite(f, path + ".omega"); });
      t.types.push_back(spec);
    }
  });
  with_field(obj, "ic_mode", [&](const njson& j) {
    const std::string mode = as_string(j, "taxation.ic_mode");
    if (mode == "full") {
      t.ic_mode = tax::IcMode::full;
    } else if (mode == "partial") {
      t.ic_mode = tax::IcMode::partial;
    } else {
      fail("taxation.ic_mode", "expected \"full\" or \"partial\"");
    }
  });
  with_field(obj, "c_min", [&](const njson& j) {
    t.c_min = as_finite(j, "taxation.c_min");
    if (!(t.c_min > 0.0)) fail("taxation.c_min", "must be > 0");
  });
  with_field(obj, "c_max", [&](const njson& j) {
    t.c_max = as_finite(j, "taxation.c_max");
    if (!(t.c_max > 0.0)) fail("taxation.c_max", "must be > 0");
  });
  with_field(obj, "ell_max", [&](const njson& j) {
    t.ell_max = as_finite(j, "taxation.ell_max");
    if (!(t.ell_max > 0.0)) fail("taxation.ell_max", "must be > 0");
  });
  with_field(obj, "resource_lambda", [&](const njson& j) {
    t.resource_lambda = as_finite(j, "taxation.resource_lambda");
    if (t.resource_lambda < 0.0) fail("taxation.resource_lambda", "must be >= 0");
  });
  if (t.calibration == "explicit" && t.types.empty()) {
    fail("taxation.types", "required when calibration is \"explicit\"");
  }
  try {
    t.economy();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail("taxation", e.what());
  }
}

inline void parse_custom(const njson& obj, RunConfig& cfg) {
  require_object(obj, "custom");
  check_keys(obj, "custom", {"box", "payoff", "pooled"});
  CustomModelConfig& c = cfg.custom;

  auto box_it = obj.find("box");
  if (box_it == obj.end() || !box_it->is_array() || box_it->empty()) {
    fail("custom.box", "expected a non-empty array of [lo, hi] pairs");
  }
  c.box.clear();
  for (std::size_t i = 0; i < box_it->size(); ++i) {
    const std::string path = "custom.box[" + std::to_string(i) + "]";
    const njson& pr = (*box_it)[i];
    if (!pr.is_array() || pr.size() != 2) fail(path, "expected [lo, hi]");
    Interval iv{as_finite(pr[0], path + "[0]"), as_finite(pr[1], path + "[1]")};
    if (!(iv.lo < iv.hi)) fail(path, "requires lo < hi");
    c.box.push_back(iv);
  }
  const std::size_t dim = c.box.size();

  auto payoff_it = obj.find("payoff");
  if (payoff_it == obj.end()) fail("custom.payoff", "required");
  require_object(*payoff_it, "custom.payoff");
  check_keys(*payoff_it, "custom.payoff", {"quadratic", "linear", "constant"});
  c.payoff_quadratic.assign(dim, 0.0);
  c.payoff_linear.assign(dim, 0.0);
  c.payoff_constant = 0.0;
  with_field(*payoff_it, "quadratic",
             [&](const njson& j) { c.payoff_quadratic = as_vec(j, "custom.payoff.quadratic"); });
  with_field(*payoff_it, "linear",
             [&](const njson& j) { c.payoff_linear = as_vec(j, "custom.payoff.linear"); });
  with_field(*payoff_it, "constant", [&](const njson& j) {
    c.payoff_constant = as_finite(j, "custom.payoff.constant");
  });
  if (c.payoff_quadratic.size() != dim) fail("custom.payoff.quadratic", "length must match box");
  if (c.payoff_linear.size() != dim) fail("custom.payoff.linear", "length must match box");

  c.pooled_linear.clear();
  c.pooled_constant.clear();
  with_field(obj, "pooled", [&](const njson& rows) {
    if (!rows.is_array()) fail("custom.pooled", "expected an array");
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const std::string path = "custom.pooled[" + std::to_string(t) + "]";
      require_object(rows[t], path);
      check_keys(rows[t], path, {"linear", "constant"});
      Vec lin(dim, 0.0);
      double cst = 0.0;
      with_field(rows[t], "linear", [&](const njson& j) { lin = as_vec(j, path + ".linear"); });
      with_field(rows[t], "constant",
                 [&](const njson& j) { cst = as_finite(j, path + ".constant"); });
      if (lin.size() != dim) fail(path + ".linear", "length must match box");
      c.pooled_linear.push_back(std::move(lin));
      c.pooled_constant.push_back(cst);
    }
  });
  if (c.pooled_linear.empty()) fail("custom.pooled", "expected at least one constraint row");
}

}  // namespace detail

/**
 * Parses and validates a JSON run description, applying model-specific
 * defaults (schedule, iteration count, cluster tolerance) to unset fields.
 * Throws ConfigError with a field path (or the JSON parser's line/byte
 * position) on any problem.
 */
inline RunConfig parse_run_config(const detail::njson& root) {
  using detail::as_bool;
  using detail::as_finite;
  using detail::as_int;
  using detail::as_string;
  using detail::fail;
  using detail::njson;
  using detail::with_field;

  detail::require_object(root, "(document)");
  detail::check_keys(root, "",
                     {"model", "moral_hazard", "taxation", "custom", "schedule", "iterations",
                      "window", "cluster_tol", "inner", "grid_points", "oracle", "out_dir",
                      "trajectory_stride", "ladder"});

  RunConfig cfg;

  auto model_it = root.find("model");
  if (model_it == root.end()) fail("model", "required (moral-hazard, taxation, or custom)");
  const std::string model = as_string(*model_it, "model");
  if (model == "moral-hazard") {
    cfg.model = ModelKind::moral_hazard;
  } else if (model == "taxation") {
    cfg.model = ModelKind::taxation;
  } else if (model == "custom") {
    cfg.model = ModelKind::custom;
  } else {
    fail("model", "unknown model '" + model + "' (expected moral-hazard, taxation, or custom)");
  }

  if (cfg.model != ModelKind::moral_hazard && root.contains("moral_hazard")) {
    fail("moral_hazard", "not allowed when model is " + std::string(to_string(cfg.model)));
  }
  if (cfg.model != ModelKind::taxation && root.contains("taxation")) {
    fail("taxation", "not allowed when model is " + std::string(to_string(cfg.model)));
  }
  if (cfg.model != ModelKind::custom && root.contains("custom")) {
    fail("custom", "not allowed when model is " + std::string(to_string(cfg.model)));
  }

  switch (cfg.model) {
    case ModelKind::moral_hazard:
      if (root.contains("moral_hazard")) detail::parse_moral_hazard(root["moral_hazard"], cfg);
      break;
    case ModelKind::taxation:
      if (root.contains("taxation")) detail::parse_taxation(root["taxation"], cfg);
      break;
    case ModelKind::custom:
      if (!root.contains("custom")) fail("custom", "required when model is custom");
      detail::parse_custom(root["custom"], cfg);
      break;
  }

  // Model-dependent defaults.
  switch (cfg.model) {
    case ModelKind::moral_hazard:
      cfg.schedule = mh::default_schedule(cfg.moral_hazard);
      cfg.iterations = mh::default_iterations(cfg.moral_hazard);
      cfg.cluster_tol = 1e-2;
      cfg.inner = InnerKind::foc;
      break;
    case ModelKind::taxation:
      cfg.schedule = tax::default_tax_schedule();
      cfg.iterations = tax::default_tax_iterations();
      cfg.cluster_tol = 2e-2;
      break;
    case ModelKind::custom:
      cfg.schedule = StepSchedule(1.0, 10.0, 0.8);
      cfg.iterations = 2000;
      cfg.cluster_tol = 1e-2;
      cfg.inner = InnerKind::grid;
      break;
  }

  with_field(root, "schedule", [&](const njson& obj) {
    detail::require_object(obj, "schedule");
    detail::check_keys(obj, "schedule", {"scale", "offset", "exponent"});
    double s = cfg.schedule.scale, k0 = cfg.schedule.offset, p = cfg.schedule.exponent;
    with_field(obj, "scale", [&](const njson& j) { s = as_finite(j, "schedule.scale"); });
    with_field(obj, "offset", [&](const njson& j) { k0 = as_finite(j, "schedule.offset"); });
    with_field(obj, "exponent", [&](const njson& j) { p = as_finite(j, "schedule.exponent"); });
    try {
      cfg.schedule = StepSchedule(s, k0, p);
    } catch (const std::exception& e) {
      fail("schedule", e.what());
    }
  });

  with_field(root, "iterations", [&](const njson& j) {
    cfg.iterations = as_int(j, "iterations");
  });
  if (cfg.iterations < 1) fail("iterations", "must be >= 1");

  with_field(root, "window", [&](const njson& j) {
    if (j.is_null()) {
      cfg.window.reset();
      return;
    }
    if (!j.is_array() || j.size() != 2) fail("window", "expected [k_start, k_end] or null");
    const int a = as_int(j[0], "window[0]");
    const int b = as_int(j[1], "window[1]");
    if (a < 1 || b < a) fail("window", "requires 1 <= k_start <= k_end");
    if (b > cfg.iterations) fail("window", "k_end exceeds the iteration count");
    cfg.window = std::make_pair(a, b);
  });

  with_field(root, "cluster_tol", [&](const njson& j) {
    cfg.cluster_tol = as_finite(j, "cluster_tol");
    if (cfg.cluster_tol < 0.0) fail("cluster_tol", "must be >= 0");
  });

  with_field(root, "inner", [&](const njson& j) {
    const std::string inner = as_string(j, "inner");
    if (cfg.model == ModelKind::taxation) {
      fail("inner", "the taxation model always uses its specialized per-type maximizer");
    }
    if (inner == "foc") {
      cfg.inner = InnerKind::foc;
    } else if (inner == "grid") {
      cfg.inner = InnerKind::grid;
    } else {
      fail("inner", "expected \"foc\" or \"grid\"");
    }
    if (cfg.model == ModelKind::custom && cfg.inner == InnerKind::foc) {
      fail("inner", "the custom model supports only the grid maximizer");
    }
  });

  with_field(root, "grid_points", [&](const njson& j) {
    cfg.grid_points = as_int(j, "grid_points");
    if (cfg.grid_points < 2) fail("grid_points", "must be >= 2");
  });

  with_field(root, "oracle", [&](const njson& obj) {
    detail::require_object(obj, "oracle");
    detail::check_keys(obj, "oracle", {"enabled", "c_step", "max_nonzeros", "comparison_scaling"});
    with_field(obj, "enabled",
               [&](const njson& j) { cfg.oracle.enabled = as_bool(j, "oracle.enabled"); });
    with_field(obj, "c_step", [&](const njson& j) {
      cfg.oracle.c_step = as_finite(j, "oracle.c_step");
      if (!(cfg.oracle.c_step > 0.0)) fail("oracle.c_step", "must be > 0");
    });
    with_field(obj, "max_nonzeros", [&](const njson& j) {
      if (!j.is_number_integer()) fail("oracle.max_nonzeros", "expected an integer");
      cfg.oracle.max_nonzeros = j.get<std::int64_t>();
      if (cfg.oracle.max_nonzeros < 1) fail("oracle.max_nonzeros", "must be >= 1");
    });
    with_field(obj, "comparison_scaling", [&](const njson& j) {
      cfg.oracle.comparison_scaling = as_bool(j, "oracle.comparison_scaling");
    });
    if (cfg.oracle.enabled && cfg.model == ModelKind::taxation) {
      fail("oracle.enabled", "no finite oracle assembly exists for the taxation model");
    }
  });

  with_field(root, "out_dir", [&](const njson& j) {
    cfg.out_dir = as_string(j, "out_dir");
    if (cfg.out_dir.empty()) fail("out_dir", "must be non-empty");
  });

  with_field(root, "trajectory_stride", [&](const njson& j) {
    cfg.trajectory_stride = as_int(j, "trajectory_stride");
    if (cfg.trajectory_stride < 0) fail("trajectory_stride", "must be >= 0");
  });

  with_field(root, "ladder", [&](const njson& j) {
    if (!j.is_array()) fail("ladder", "expected an array of action spacings");
    cfg.ladder.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      const double v = as_finite(j[i], "ladder[" + std::to_string(i) + "]");
      if (!(v > 0.0)) fail("ladder[" + std::to_string(i) + "]", "must be > 0");
      cfg.ladder.push_back(v);
    }
  });

  return cfg;
}

/// Parses JSON text; `origin` names the source (file path or "preset") in
/// syntax diagnostics, which carry the parser's line and byte position.
inline RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  detail::njson root;
  try {
    root = detail::njson::parse(text);
  } catch (const detail::njson::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return parse_run_config(root);
}

// ---------------------------------------------------------------------------
// Canonical serialization and hashing
// ---------------------------------------------------------------------------

/**
 * Serializes a resolved RunConfig with every field spelled out in a fixed
 * key order. Two documents that resolve to the same run produce the same
 * canonical form, hence the same hash.
 */
inline nlohmann::ordered_json canonical_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["model"] = to_string(cfg.model);
  switch (cfg.model) {
    case ModelKind::moral_hazard: {
      const mh::MoralHazardModel& m = cfg.moral_hazard;
      nlohmann::ordered_json b;
      b["a_lo"] = m.a_lo;
      b["a_step"] = m.a_step;
      b["a_hi"] = m.a_hi;
      b["outputs"] = m.outputs;
      b["c_min"] = m.c_min;
      b["c_max"] = m.c_max;
      b["alpha"] = m.alpha;
      b["kappa"] = m.kappa;
      b["a_bar"] = m.a_bar;
      b["beta"] = m.beta;
      b["ic_scaling"] = m.ic_scaling;
      b["resource_lambda"] = cfg.mh_resource_lambda;
      j["moral_hazard"] = std::move(b);
      break;
    }
    case ModelKind::taxation: {
      const TaxationConfig& t = cfg.taxation;
      nlohmann::ordered_json b;
      b["calibration"] = t.calibration;
      if (t.calibration == "equal-eta") {
        b["n_types"] = t.n_types;
        b["eta"] = t.eta;
      }
      if (t.calibration == "explicit") {
        nlohmann::ordered_json types = nlohmann::ordered_json::array();
        for (const tax::TypeSpec& s : t.types) {
          nlohmann::ordered_json row;
          row["w"] = s.w;
          row["eta"] = s.eta;
          row["psi"] = s.psi;
          row["omega"] = s.omega;
          types.push_back(std::move(row));
        }
        b["types"] = std::move(types);
      }
      b["ic_mode"] = tax::to_string(t.ic_mode);
      b["c_min"] = t.c_min;
      b["c_max"] = t.c_max;
      b["ell_max"] = t.ell_max;
      b["resource_lambda"] = t.resource_lambda;
      j["taxation"] = std::move(b);
      break;
    }
    case ModelKind::custom: {
      const CustomModelConfig& c = cfg.custom;
      nlohmann::ordered_json b;
      nlohmann::ordered_json box = nlohmann::ordered_json::array();
      for (const Interval& iv : c.box) box.push_back({iv.lo, iv.hi});
      b["box"] = std::move(box);
      nlohmann::ordered_json payoff;
      payoff["quadratic"] = c.payoff_quadratic;
      payoff["linear"] = c.payoff_linear;
      payoff["constant"] = c.payoff_constant;
      b["payoff"] = std::move(payoff);
      nlohmann::ordered_json pooled = nlohmann::ordered_json::array();
      for (std::size_t t = 0; t < c.pooled_linear.size(); ++t) {
        nlohmann::ordered_json row;
        row["linear"] = c.pooled_linear[t];
        row["constant"] = c.pooled_constant[t];
        pooled.push_back(std::move(row));
      }
      b["pooled"] = std::move(pooled);
      j["custom"] = std::move(b);
      break;
    }
  }
  nlohmann::ordered_json sched;
  sched["scale"] = cfg.schedule.scale;
  sched["offset"] = cfg.schedule.offset;
  sched["exponent"] = cfg.schedule.exponent;
  j["schedule"] = std::move(sched);
  j["iterations"] = cfg.iterations;
  if (cfg.window) {
    j["window"] = {cfg.window->first, cfg.window->second};
  } else {
    j["window"] = nullptr;
  }
  j["cluster_tol"] = cfg.cluster_tol;
  if (cfg.model != ModelKind::taxation) {
    j["inner"] = to_string(cfg.inner);
    j["grid_points"] = cfg.grid_points;
  }
  nlohmann::ordered_json oracle;
  oracle["enabled"] = cfg.oracle.enabled;
  oracle["c_step"] = cfg.oracle.c_step;
  oracle["max_nonzeros"] = cfg.oracle.max_nonzeros;
  oracle["comparison_scaling"] = cfg.oracle.comparison_scaling;
  j["oracle"] = std::move(oracle);
  j["out_dir"] = cfg.out_dir;
  j["trajectory_stride"] = cfg.trajectory_stride;
  j["ladder"] = cfg.ladder;
  return j;
}

/// 16-hex-digit FNV-1a hash of the canonical serialization; stamped into
/// every artifact.
inline std::string config_hash(const RunConfig& cfg) {
  const std::uint64_t h = fnv1a64(canonical_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/**
 * Built-in run descriptions, also shipped as files under presets/ (the test
 * suite keeps file and table in sync). The embedded copies make
 * `--preset NAME` work from any directory.
 */
inline const std::vector<std::pair<std::string, std::string>>& builtin_presets() {
  static const std::vector<std::pair<std::string, std::string>> presets = {
      {"example1", R"json({
  "model": "moral-hazard",
  "moral_hazard": {
    "a_lo": 0.05,
    "a_step": 0.025,
    "a_hi": 1.95,
    "outputs": [0.5, 1.5],
    "c_min": 0.0,
    "c_max": 2.0,
    "ic_scaling": true,
    "resource_lambda": 0.5
  },
  "iterations": 4000,
  "window": [3800, 4000],
  "cluster_tol": 0.01,
  "inner": "foc",
  "out_dir": "out/example1"
}
)json"},
      {"tiny", R"json({
  "model": "moral-hazard",
  "moral_hazard": {
    "a_lo": 0.05,
    "a_step": 0.475,
    "a_hi": 1.95,
    "resource_lambda": 0.5
  },
  "iterations": 4000,
  "window": [3800, 4000],
  "cluster_tol": 0.01,
  "inner": "foc",
  "oracle": {
    "enabled": true,
    "c_step": 0.1
  },
  "out_dir": "out/tiny"
}
)json"},
      {"judd25", R"json({
  "model": "taxation",
  "taxation": {
    "calibration": "judd25",
    "ic_mode": "full",
    "resource_lambda": 0.5
  },
  "iterations": 200000,
  "cluster_tol": 0.02,
  "trajectory_stride": 100,
  "out_dir": "out/judd25"
}
)json"},
      {"equaleta5", R"json({
  "model": "taxation",
  "taxation": {
    "calibration": "equal-eta",
    "n_types": 5,
    "eta": 0.5,
    "ic_mode": "full",
    "resource_lambda": 0.5
  },
  "iterations": 100000,
  "cluster_tol": 0.02,
  "trajectory_stride": 100,
  "out_dir": "out/equaleta5"
}
)json"},
      {"partial5", R"json({
  "model": "taxation",
  "taxation": {
    "calibration": "diagonal5",
    "ic_mode": "partial",
    "resource_lambda": 0.5
  },
  "iterations": 100000,
  "cluster_tol": 0.02,
  "trajectory_stride": 100,
  "out_dir": "out/partial5"
}
)json"},
      {"convex", R"json({
  "model": "custom",
  "custom": {
    "box": [[0.0, 1.0]],
    "payoff": {
      "quadratic": [-1.0],
      "linear": [1.4],
      "constant": -0.49
    },
    "pooled": [
      {
        "linear": [1.0],
        "constant": -0.5
      }
    ]
  },
  "schedule": {
    "scale": 1.0,
    "offset": 10.0,
    "exponent": 0.8
  },
  "iterations": 2000,
  "cluster_tol": 0.01,
  "inner": "grid",
  "grid_points": 101,
  "oracle": {
    "enabled": true
  },
  "out_dir": "out/convex"
}
)json"}};
  return presets;
}

inline std::string preset_text(const std::string& name) {
  for (const auto& [key, text] : builtin_presets()) {
    if (key == name) return text;
  }
  std::string names;
  for (const auto& [key, text] : builtin_presets()) {
    if (!names.empty()) names += ", ";
    names += key;
  }
  throw ConfigError("unknown preset '" + name + "' (available: " + names + ")");
}

inline RunConfig load_preset(const std::string& name) {
  return parse_run_config_text(preset_text(name), "preset " + name);
}

/// Parses the --window A:B command-line override.
inline std::pair<int, int> parse_window_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size()) {
    throw ConfigError("--window expects A:B with integer bounds");
  }
  int a = 0, b = 0;
  try {
    std::size_t used = 0;
    a = std::stoi(spec.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("trailing text");
    const std::string tail = spec.substr(colon + 1);
    b = std::stoi(tail, &used);
    if (used != tail.size()) throw std::invalid_argument("trailing text");
  } catch (const std::exception&) {
    throw ConfigError("--window expects A:B with integer bounds");
  }
  if (a < 1 || b < a) throw ConfigError("--window requires 1 <= A <= B");
  return {a, b};
}

}  // namespace lotsol::cli
