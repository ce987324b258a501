// Tests for the inner maximizers: the exhaustive grid solver and the
// first-order separable solver, including the cached-coefficient paths.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "lotsol/lagrangian.hpp"
#include "lotsol/models/moral_hazard.hpp"
#include "lotsol/problem.hpp"
#include "lotsol/solvers/grid.hpp"
#include "lotsol/solvers/separable.hpp"

namespace {

using lotsol::ConcaveCoordinateUtility;
using lotsol::DualUnboundedDirection;
using lotsol::eval_constraints;
using lotsol::eval_lagrangian;
using lotsol::FocInnerSolver;
using lotsol::GridInnerSolver;
using lotsol::InnerResult;
using lotsol::Interval;
using lotsol::LotteryProblem;
using lotsol::MultiplierState;
using lotsol::SeparableSpec;
using lotsol::Vec;

// Single action, one coordinate, payoff sqrt(c), pooled constraint
// E[c - 1] <= 0. The stationary point is c* = 1 / (4 lambda^2).
LotteryProblem sqrt_problem(double c_hi = 2.0) {
  LotteryProblem p;
  p.actions = {Vec{0.0}};
  p.consumption_box = {Interval{0.0, c_hi}};
  p.payoff = [](int, const Vec& c) { return std::sqrt(c[0]); };
  p.pooled_constraints.push_back([](int, const Vec& c) { return c[0] - 1.0; });
  return p;
}

SeparableSpec sqrt_spec(double u_coef = 1.0, bool linear = true) {
  SeparableSpec spec;
  spec.u0 = [](int) { return 0.0; };
  spec.u_coef = [u_coef](int, int) { return u_coef; };
  spec.w = {ConcaveCoordinateUtility{
      [](double c) { return std::sqrt(c); },
      [](double c) { return 0.5 / std::sqrt(c); },
      [](double x) { return 0.25 / (x * x); },
  }};
  spec.linear_g = linear;
  if (linear) {
    spec.g_slope = [](int, int, int) { return 1.0; };
  } else {
    spec.g_partial = [](int, int, int, double) { return 1.0; };
  }
  return spec;
}

MultiplierState lambda_only(double lambda) {
  MultiplierState m = MultiplierState::zeros(1, 0, 1);
  m.lambda[0] = lambda;
  return m;
}

MultiplierState random_multipliers(std::mt19937& rng, const LotteryProblem& p,
                                   double lam_lo, double lam_hi, double gamma_hi) {
  MultiplierState m = MultiplierState::zeros(p.num_pooled(), p.num_per_action(),
                                             p.num_actions());
  std::uniform_real_distribution<double> ul(lam_lo, lam_hi);
  std::uniform_real_distribution<double> ug(0.0, gamma_hi);
  for (auto& v : m.lambda) v = ul(rng);
  for (auto& v : m.gamma) v = ug(rng);
  return m;
}

}  // namespace

TEST_CASE("grid solver materializes exact endpoints") {
  const std::vector<Interval> box = {Interval{0.0, 2.0}, Interval{-1.0, 1.0}};
  const GridInnerSolver g = GridInnerSolver::uniform(box, std::vector<int>{3, 5});
  REQUIRE(g.coordinate_grids[0] == Vec{0.0, 1.0, 2.0});
  REQUIRE(g.coordinate_grids[1].front() == -1.0);
  REQUIRE(g.coordinate_grids[1].back() == 1.0);
  REQUIRE(g.total_points() == 15);

  const GridInnerSolver single = GridInnerSolver::uniform(box, 1);
  REQUIRE(single.coordinate_grids[0] == Vec{0.0});
  REQUIRE(single.coordinate_grids[1] == Vec{-1.0});

  REQUIRE_THROWS_AS(GridInnerSolver::uniform(box, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(GridInnerSolver::uniform(box, std::vector<int>{3}),
                    std::invalid_argument);
  const std::vector<Interval> unbounded = {
      Interval{0.0, std::numeric_limits<double>::infinity()}};
  REQUIRE_THROWS_AS(GridInnerSolver::uniform(unbounded, 4), std::invalid_argument);
}

TEST_CASE("grid solver breaks ties toward the lowest action and point") {
  LotteryProblem p;
  p.actions = {Vec{0.0}, Vec{1.0}};
  p.consumption_box = {Interval{0.0, 1.0}};
  p.payoff = [](int, const Vec&) { return 7.0; };  // flat everywhere
  const GridInnerSolver grid = GridInnerSolver::uniform(p.consumption_box, 5);
  const MultiplierState m = MultiplierState::zeros(0, 0, 2);
  const InnerResult r = grid(p, m);
  REQUIRE(r.a_index == 0);
  REQUIRE(r.c == Vec{0.0});
  REQUIRE(r.value == 7.0);
}

TEST_CASE("grid solver scans the full product grid") {
  LotteryProblem p;
  p.actions = {Vec{0.0}};
  p.consumption_box = {Interval{0.0, 1.0}, Interval{0.0, 1.0}};
  // Peak in the interior of the product grid, away from tie-break defaults.
  p.payoff = [](int, const Vec& c) {
    return -(c[0] - 0.5) * (c[0] - 0.5) - (c[1] - 0.75) * (c[1] - 0.75);
  };
  const GridInnerSolver grid = GridInnerSolver::uniform(p.consumption_box, 5);
  const MultiplierState m = MultiplierState::zeros(0, 0, 1);
  const InnerResult r = grid(p, m);
  REQUIRE(r.c == Vec{0.5, 0.75});
  REQUIRE(r.value == 0.0);
}

TEST_CASE("separable solver reproduces the closed-form stationary point") {
  const LotteryProblem p = sqrt_problem();
  const SeparableSpec spec = sqrt_spec();
  FocInnerSolver foc(p, spec);

  SECTION("interior solution at lambda = 1/2") {
    const InnerResult r = foc(p, lambda_only(0.5));
    REQUIRE(r.a_index == 0);
    REQUIRE(r.c[0] == 1.0);  // 0.25 / 0.5^2 exactly
    REQUIRE(r.value == Catch::Approx(1.0).margin(1e-14));
    REQUIRE(r.value == Catch::Approx(eval_lagrangian(p, 0, r.c, lambda_only(0.5)))
                           .margin(1e-12));
  }
  SECTION("clamps to the upper bound when the price is low") {
    const InnerResult r = foc(p, lambda_only(0.25));
    REQUIRE(r.c[0] == 2.0);
    REQUIRE(r.value == Catch::Approx(std::sqrt(2.0) - 0.25).margin(1e-14));
  }
  SECTION("small interior point when the price is high") {
    const InnerResult r = foc(p, lambda_only(5.0));
    REQUIRE(r.c[0] == Catch::Approx(0.01).margin(1e-16));
    REQUIRE(r.value == Catch::Approx(std::sqrt(0.01) - 5.0 * (0.01 - 1.0)).margin(1e-12));
  }
  SECTION("zero price rides to a finite upper bound") {
    const InnerResult r = foc(p, lambda_only(0.0));
    REQUIRE(r.c[0] == 2.0);
    REQUIRE(r.value == Catch::Approx(std::sqrt(2.0)).margin(1e-14));
  }
}

TEST_CASE("separable solver pins nonpositive payoff coefficients to the floor") {
  const LotteryProblem p = [] {
    LotteryProblem q = sqrt_problem();
    q.payoff = [](int, const Vec& c) { return -std::sqrt(c[0]); };
    return q;
  }();
  FocInnerSolver foc(p, sqrt_spec(-1.0));
  const InnerResult r = foc(p, lambda_only(0.5));
  REQUIRE(r.c[0] == 0.0);
  REQUIRE(r.value == Catch::Approx(0.5).margin(1e-14));  // -lambda * g(0) = 0.5
}

TEST_CASE("unbounded coordinate with zero price raises the dedicated error") {
  const LotteryProblem p = sqrt_problem(std::numeric_limits<double>::infinity());
  FocInnerSolver foc(p, sqrt_spec());
  REQUIRE_THROWS_AS(foc(p, lambda_only(0.0)), DualUnboundedDirection);
  // With a positive price the problem is fine even on the unbounded box.
  const InnerResult r = foc(p, lambda_only(0.5));
  REQUIRE(r.c[0] == 1.0);
}

TEST_CASE("bisection branch matches the linear-constraint branch") {
  const LotteryProblem p = sqrt_problem();
  FocInnerSolver linear(p, sqrt_spec(1.0, true));
  FocInnerSolver bisect(p, sqrt_spec(1.0, false));
  for (double lam : {0.3, 0.5, 0.75, 1.0, 2.0, 5.0}) {
    const InnerResult a = linear(p, lambda_only(lam));
    const InnerResult b = bisect(p, lambda_only(lam));
    REQUIRE(b.c[0] == Catch::Approx(a.c[0]).margin(1e-8));
    REQUIRE(b.value == Catch::Approx(a.value).margin(1e-8));
  }
}

TEST_CASE("separable argmax always lands inside the consumption box") {
  const lotsol::mh::MhProblem mh =
      lotsol::mh::to_problem([] {
        lotsol::mh::MoralHazardModel m;
        m.a_step = 0.2;
        return m;
      }());
  FocInnerSolver foc(mh.problem, mh.spec);
  std::mt19937 rng(77);
  for (int t = 0; t < 50; ++t) {
    const MultiplierState m = random_multipliers(rng, mh.problem, 0.05, 2.0, 0.05);
    const InnerResult r = foc(mh.problem, m);
    REQUIRE(r.a_index >= 0);
    REQUIRE(r.a_index < mh.problem.num_actions());
    for (int c = 0; c < mh.problem.dim(); ++c) {
      REQUIRE(r.c[static_cast<std::size_t>(c)] >= mh.problem.consumption_box[c].lo);
      REQUIRE(r.c[static_cast<std::size_t>(c)] <= mh.problem.consumption_box[c].hi);
    }
  }
}

TEST_CASE("separable argmax is a local maximum of the Lagrangian") {
  const lotsol::mh::MhProblem mh =
      lotsol::mh::to_problem([] {
        lotsol::mh::MoralHazardModel m;
        m.a_step = 0.2;
        return m;
      }());
  FocInnerSolver foc(mh.problem, mh.spec);
  std::mt19937 rng(1234);
  const double delta = 1e-4;

  for (int t = 0; t < 20; ++t) {
    const MultiplierState m = random_multipliers(rng, mh.problem, 0.3, 1.5, 0.02);
    const InnerResult r = foc(mh.problem, m);
    const double base = eval_lagrangian(mh.problem, r.a_index, r.c, m);
    for (int coord = 0; coord < mh.problem.dim(); ++coord) {
      for (double sign : {-1.0, 1.0}) {
        Vec c = r.c;
        const Interval& box = mh.problem.consumption_box[static_cast<std::size_t>(coord)];
        const double moved =
            std::clamp(c[static_cast<std::size_t>(coord)] + sign * delta, box.lo, box.hi);
        if (moved == c[static_cast<std::size_t>(coord)]) continue;  // at a bound
        c[static_cast<std::size_t>(coord)] = moved;
        REQUIRE(eval_lagrangian(mh.problem, r.a_index, c, m) <= base + 1e-9);
      }
    }
  }
}

TEST_CASE("separable solver dominates a fine reference grid") {
  const lotsol::mh::MhProblem mh =
      lotsol::mh::to_problem([] {
        lotsol::mh::MoralHazardModel m;
        m.a_step = 0.475;  // five actions keeps the 201^2 grid scan fast
        return m;
      }());
  FocInnerSolver foc(mh.problem, mh.spec);
  const GridInnerSolver grid = GridInnerSolver::uniform(mh.problem.consumption_box, 201);
  std::mt19937 rng(99);
  for (int t = 0; t < 25; ++t) {
    const MultiplierState m = random_multipliers(rng, mh.problem, 0.4, 0.8, 0.01);
    const InnerResult exact = foc(mh.problem, m);
    const InnerResult approx = grid(mh.problem, m);
    // The grid is a subset of the box, so the exact optimum cannot be worse.
    REQUIRE(exact.value >= approx.value - 1e-12);
    REQUIRE(exact.value - approx.value <= 5e-4);
  }
}

TEST_CASE("dual-value drop across a multiplier move is bounded by the subgradient") {
  const lotsol::mh::MhProblem mh =
      lotsol::mh::to_problem([] {
        lotsol::mh::MoralHazardModel m;
        m.a_step = 0.2;
        return m;
      }());
  FocInnerSolver foc(mh.problem, mh.spec);
  std::mt19937 rng(2025);

  for (int t = 0; t < 50; ++t) {
    const MultiplierState m1 = random_multipliers(rng, mh.problem, 0.2, 1.5, 0.03);
    const MultiplierState m2 = random_multipliers(rng, mh.problem, 0.2, 1.5, 0.03);

    const InnerResult x1 = foc(mh.problem, m1);
    const InnerResult x2 = foc(mh.problem, m2);

    Vec g, h;
    eval_constraints(mh.problem, x1.a_index, x1.c, g, h);
    double rhs = x1.value;
    for (int i = 0; i < mh.problem.num_pooled(); ++i) {
      rhs -= g[static_cast<std::size_t>(i)] * (m2.lambda[i] - m1.lambda[i]);
    }
    for (int j = 0; j < mh.problem.num_per_action(); ++j) {
      rhs -= h[static_cast<std::size_t>(j)] *
             (m2.gamma_at(j, x1.a_index) - m1.gamma_at(j, x1.a_index));
    }
    REQUIRE(x2.value >= rhs - 1e-9);

    // Midpoint convexity of the dual in the full multiplier vector.
    MultiplierState mid = m1;
    for (std::size_t i = 0; i < mid.lambda.size(); ++i) {
      mid.lambda[i] = 0.5 * (m1.lambda[i] + m2.lambda[i]);
    }
    for (std::size_t i = 0; i < mid.gamma.size(); ++i) {
      mid.gamma[i] = 0.5 * (m1.gamma[i] + m2.gamma[i]);
    }
    const InnerResult xm = foc(mh.problem, mid);
    REQUIRE(xm.value <= 0.5 * (x1.value + x2.value) + 1e-9);
  }
}

TEST_CASE("cached coefficient sums survive arbitrary multiplier mutations") {
  // The iterating solver memoizes per-action sums keyed on the gamma rows; a
  // fresh solver recomputes everything. Both must agree bit for bit across a
  // mutation pattern that touches single entries, whole rows, and reverts.
  const lotsol::mh::MhProblem mh =
      lotsol::mh::to_problem([] {
        lotsol::mh::MoralHazardModel m;
        m.a_step = 0.2;
        return m;
      }());
  FocInnerSolver cached(mh.problem, mh.spec);
  std::mt19937 rng(4242);
  std::uniform_real_distribution<double> ug(0.0, 0.05);
  std::uniform_int_distribution<int> pick_gamma(
      0, static_cast<int>(mh.problem.num_actions() * mh.problem.num_per_action()) - 1);

  MultiplierState m = random_multipliers(rng, mh.problem, 0.3, 1.0, 0.02);
  const MultiplierState first = m;
  InnerResult first_result;

  for (int step = 0; step < 30; ++step) {
    const InnerResult a = cached(mh.problem, m);
    FocInnerSolver fresh(mh.problem, mh.spec);
    const InnerResult b = fresh(mh.problem, m);
    REQUIRE(a.a_index == b.a_index);
    REQUIRE(a.c == b.c);
    REQUIRE(a.value == b.value);
    if (step == 0) first_result = a;

    switch (step % 4) {
      case 0:  // single gamma entry
        m.gamma[static_cast<std::size_t>(pick_gamma(rng))] = ug(rng);
        break;
      case 1:  // lambda only, gamma rows untouched (pure cache-hit path)
        m.lambda[0] = 0.3 + 0.01 * step;
        break;
      case 2: {  // whole row of one action
        const int a_pick = step % mh.problem.num_actions();
        for (int j = 0; j < mh.problem.num_per_action(); ++j) {
          m.gamma[static_cast<std::size_t>(a_pick) *
                      static_cast<std::size_t>(mh.problem.num_per_action()) +
                  static_cast<std::size_t>(j)] = ug(rng);
        }
        break;
      }
      case 3:  // revert to the very first state (bitwise)
        m = first;
        break;
    }
  }

  // After the final revert the cached solver must reproduce the first answer.
  m = first;
  const InnerResult again = cached(mh.problem, m);
  REQUIRE(again.a_index == first_result.a_index);
  REQUIRE(again.c == first_result.c);
  REQUIRE(again.value == first_result.value);
}

TEST_CASE("one-shot argmax helper matches the reusable solver") {
  const lotsol::mh::MhProblem mh =
      lotsol::mh::to_problem([] {
        lotsol::mh::MoralHazardModel m;
        m.a_step = 0.2;
        return m;
      }());
  std::mt19937 rng(31);
  FocInnerSolver solver(mh.problem, mh.spec);
  for (int t = 0; t < 5; ++t) {
    const MultiplierState m = random_multipliers(rng, mh.problem, 0.3, 1.0, 0.02);
    const InnerResult a = lotsol::foc_argmax(mh.problem, m, mh.spec);
    const InnerResult b = solver(mh.problem, m);
    REQUIRE(a.a_index == b.a_index);
    REQUIRE(a.c == b.c);
    REQUIRE(a.value == b.value);
  }
}

TEST_CASE("spec validation accepts the production wiring and rejects corruption") {
  const lotsol::mh::MhProblem mh =
      lotsol::mh::to_problem([] {
        lotsol::mh::MoralHazardModel m;
        m.a_step = 0.2;
        return m;
      }());
  REQUIRE_NOTHROW(lotsol::validate_separable_spec(mh.problem, mh.spec));

  SECTION("payoff coefficient corruption is caught") {
    SeparableSpec bad = mh.spec;
    bad.u_coef = [](int, int) { return 0.123; };
    REQUIRE_THROWS_AS(lotsol::validate_separable_spec(mh.problem, bad),
                      std::invalid_argument);
  }
  SECTION("per-action coefficient corruption is caught") {
    SeparableSpec bad = mh.spec;
    bad.v0 = [](int, int) { return 1.0; };
    REQUIRE_THROWS_AS(lotsol::validate_separable_spec(mh.problem, bad),
                      std::invalid_argument);
  }
  SECTION("non-concave coordinate utility is caught") {
    const LotteryProblem p = [] {
      LotteryProblem q = sqrt_problem();
      q.payoff = [](int, const Vec& c) { return c[0] * c[0]; };
      return q;
    }();
    SeparableSpec bad = sqrt_spec();
    bad.w = {ConcaveCoordinateUtility{
        [](double c) { return c * c; },
        [](double c) { return 2.0 * c; },
        [](double x) { return 0.5 * x; },
    }};
    REQUIRE_THROWS_AS(lotsol::validate_separable_spec(p, bad), std::invalid_argument);
  }
}
