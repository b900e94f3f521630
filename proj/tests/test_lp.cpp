#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <optional>
#include <random>

#include "apf/error.hpp"
#include "apf/lp.hpp"
#include "lp_oracle.hpp"

using namespace apf;
using Eigen::Index;
using Eigen::VectorXd;

TEST_CASE("single bounded variable") {
  LinearProgram lp;
  const Index x = lp.add_variable(1.0);
  lp.add_row({{x, 1.0}}, Sense::kGe, 1.0);
  const auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::kOptimal);
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.value == doctest::Approx(1.0));
}

TEST_CASE("unbounded ray") {
  LinearProgram lp;
  lp.add_variable(-1.0, 0.0);
  CHECK(solve_lp(lp).status == LpStatus::kUnbounded);

  LinearProgram free_dir;
  const Index a = free_dir.add_variable(1.0);
  const Index b = free_dir.add_variable(-2.0);
  free_dir.add_row({{a, 1.0}, {b, -1.0}}, Sense::kEq, 3.0);
  CHECK(solve_lp(free_dir).status == LpStatus::kUnbounded);
}

TEST_CASE("infeasible systems") {
  LinearProgram lp;
  const Index x = lp.add_variable(0.0);
  lp.add_row({{x, 1.0}}, Sense::kGe, 1.0);
  lp.add_row({{x, 1.0}}, Sense::kLe, 0.0);
  CHECK(solve_lp(lp).status == LpStatus::kInfeasible);

  LinearProgram eq;
  const Index a = eq.add_variable(1.0, 0.0, 10.0);
  const Index b = eq.add_variable(1.0, 0.0, 10.0);
  eq.add_row({{a, 1.0}, {b, 1.0}}, Sense::kEq, 4.0);
  eq.add_row({{a, 2.0}, {b, 2.0}}, Sense::kEq, 9.0);
  CHECK(solve_lp(eq).status == LpStatus::kInfeasible);

  LinearProgram bounds;
  bounds.add_variable(1.0, 2.0, 1.0);
  CHECK(solve_lp(bounds).status == LpStatus::kInfeasible);

  LinearProgram box;
  const Index c = box.add_variable(1.0, 0.0, 1.0);
  const Index d = box.add_variable(1.0, 0.0, 1.0);
  box.add_row({{c, 1.0}, {d, 1.0}}, Sense::kGe, 2.5);
  CHECK(solve_lp(box).status == LpStatus::kInfeasible);
}

TEST_CASE("redundant equalities are tolerated") {
  LinearProgram lp;
  const Index a = lp.add_variable(1.0, 0.0);
  const Index b = lp.add_variable(2.0, 0.0);
  lp.add_row({{a, 1.0}, {b, 1.0}}, Sense::kEq, 4.0);
  lp.add_row({{a, 2.0}, {b, 2.0}}, Sense::kEq, 8.0);
  const auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::kOptimal);
  CHECK(r.value == doctest::Approx(4.0));
  CHECK(max_violation(lp, r.x) <= 1e-9);
}

TEST_CASE("classic cycling example terminates at the optimum") {
  // Beale's degenerate LP; Dantzig pricing alone cycles on it.
  LinearProgram lp;
  const Index x4 = lp.add_variable(-0.75, 0.0);
  const Index x5 = lp.add_variable(150.0, 0.0);
  const Index x6 = lp.add_variable(-0.02, 0.0);
  const Index x7 = lp.add_variable(6.0, 0.0);
  lp.add_row({{x4, 0.25}, {x5, -60.0}, {x6, -0.04}, {x7, 9.0}}, Sense::kLe, 0.0);
  lp.add_row({{x4, 0.5}, {x5, -90.0}, {x6, -0.02}, {x7, 3.0}}, Sense::kLe, 0.0);
  lp.add_row({{x6, 1.0}}, Sense::kLe, 1.0);
  const auto r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::kOptimal);
  CHECK(r.value == doctest::Approx(-0.05).epsilon(1e-9));
  CHECK(max_violation(lp, r.x) <= 1e-9);
}

TEST_CASE("objective agrees with vertex enumeration on random bounded LPs") {
  std::mt19937_64 rng(2024);
  int optimal = 0, infeasible = 0;
  for (int t = 0; t < 300; ++t) {
    const auto lp = testing::random_bounded_lp(rng);
    CAPTURE(t);
    const auto oracle = testing::enumerate_vertices(lp);
    const auto r = solve_lp(lp);
    if (oracle) {
      ++optimal;
      REQUIRE(r.status == LpStatus::kOptimal);
      CHECK(std::abs(r.value - *oracle) <= 1e-7 * (1.0 + std::abs(*oracle)));
      CHECK(max_violation(lp, r.x) <= 1e-7);
      CHECK(lp.objective.dot(r.x) == doctest::Approx(r.value));
    } else {
      ++infeasible;
      CHECK(r.status == LpStatus::kInfeasible);
    }
  }
  CHECK(optimal > 100);
  CHECK(infeasible > 5);
}

TEST_CASE("degenerate integer LPs agree with enumeration") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 200; ++t) {
    CAPTURE(t);
    const auto lp = testing::random_bounded_lp(rng, /*integer=*/true);
    const auto oracle = testing::enumerate_vertices(lp);
    const auto r = solve_lp(lp);
    if (oracle) {
      REQUIRE(r.status == LpStatus::kOptimal);
      CHECK(std::abs(r.value - *oracle) <= 1e-7 * (1.0 + std::abs(*oracle)));
    } else {
      CHECK(r.status == LpStatus::kInfeasible);
    }
  }
}

TEST_CASE("iteration guard raises a numerical failure") {
  LinearProgram lp;
  std::vector<Index> v;
  for (int i = 0; i < 6; ++i) v.push_back(lp.add_variable(-1.0 - i, 0.0, 1.0));
  for (int i = 0; i < 6; ++i) lp.add_row({{v[static_cast<size_t>(i)], 1.0}, {v[static_cast<size_t>((i + 1) % 6)], 1.0}}, Sense::kLe, 1.5);
  LpOptions opts;
  opts.max_iterations = 1;
  CHECK_THROWS_AS(solve_lp(lp, opts), Error);
  CHECK(solve_lp(lp).status == LpStatus::kOptimal);
}
