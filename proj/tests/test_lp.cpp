#include "tcpp/lp.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <functional>
#include <random>

using namespace tcpp;
using lp::LinearProgram;
using lp::Relation;
using lp::Sense;
using lp::Status;

namespace {

// Vertex enumeration oracle for small bounded programs: every basic solution is the
// intersection of n active rows taken from the constraints and the box bounds.
std::optional<double> vertex_oracle(const LinearProgram& p) {
  const std::size_t n = p.num_variables();
  struct Row {
    std::vector<double> a;
    double b;
  };
  std::vector<Row> rows;
  for (const auto& c : p.constraints) rows.push_back({c.coefficients, c.bound});
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    rows.push_back({e, p.lower[j]});
    rows.push_back({e, p.upper[j]});
  }
  auto feasible = [&](const std::vector<double>& x) {
    for (const auto& c : p.constraints) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += c.coefficients[j] * x[j];
      if (c.relation == Relation::less_equal && s > c.bound + 1e-9) return false;
      if (c.relation == Relation::greater_equal && s < c.bound - 1e-9) return false;
      if (c.relation == Relation::equal && std::abs(s - c.bound) > 1e-9) return false;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (x[j] < p.lower[j] - 1e-9 || x[j] > p.upper[j] + 1e-9) return false;
    return true;
  };
  std::optional<double> best;
  std::vector<std::size_t> pick(n);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
    if (depth == n) {
      std::vector<std::vector<double>> m(n, std::vector<double>(n + 1));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) m[i][j] = rows[pick[i]].a[j];
        m[i][n] = rows[pick[i]].b;
        if (!std::isfinite(m[i][n])) return;
      }
      for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c; r < n; ++r)
          if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        if (std::abs(m[piv][c]) < 1e-10) return;
        std::swap(m[c], m[piv]);
        for (std::size_t r = 0; r < n; ++r) {
          if (r == c) continue;
          const double f = m[r][c] / m[c][c];
          for (std::size_t k = c; k <= n; ++k) m[r][k] -= f * m[c][k];
        }
      }
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = m[i][n] / m[i][i];
      if (!feasible(x)) return;
      double v = 0.0;
      for (std::size_t j = 0; j < n; ++j) v += p.objective[j] * x[j];
      if (!best || (p.sense == Sense::maximize ? v > *best : v < *best)) best = v;
      return;
    }
    for (std::size_t r = start; r < rows.size(); ++r) {
      pick[depth] = r;
      rec(r + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

LinearProgram random_box_program(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> rel(0, 2);
  LinearProgram p(n, rng() % 2 ? Sense::maximize : Sense::minimize);
  for (auto& c : p.objective) c = u(rng);
  for (std::size_t j = 0; j < n; ++j) {
    p.lower[j] = -1.0 - std::abs(u(rng));
    p.upper[j] = 1.0 + std::abs(u(rng));
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> a(n);
    for (auto& x : a) x = u(rng);
    const int r = rel(rng);
    // Keep the origin strictly feasible for inequalities; equalities pass through a random point.
    if (r == 1) {
      double b = 0.0;
      for (std::size_t j = 0; j < n; ++j) b += a[j] * 0.3 * u(rng);
      p.add_constraint(a, Relation::equal, b);
    } else {
      p.add_constraint(a, r == 0 ? Relation::less_equal : Relation::greater_equal,
                       r == 0 ? 0.2 + std::abs(u(rng)) : -0.2 - std::abs(u(rng)));
    }
  }
  return p;
}

}  // namespace

TEST(LpSolve, SingleVariableBound) {
  LinearProgram p(1, Sense::maximize);
  p.objective = {1.0};
  p.add_constraint(std::vector<double>{1.0}, Relation::less_equal, 1.0);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.value, 1.0, 1e-12);
}

TEST(LpSolve, SimplexFace) {
  LinearProgram p(2, Sense::maximize);
  p.objective = {1.0, 1.0};
  p.add_constraint({1.0, 1.0}, Relation::less_equal, 1.0);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.value, 1.0, 1e-12);
}

TEST(LpSolve, ContradictoryBoundsAreInfeasible) {
  LinearProgram p(1, Sense::maximize);
  p.objective = {1.0};
  p.add_constraint(std::vector<double>{1.0}, Relation::greater_equal, 1.0);
  p.add_constraint(std::vector<double>{1.0}, Relation::less_equal, 0.0);
  EXPECT_EQ(lp::solve(p).status, Status::infeasible);
}

TEST(LpSolve, TrinomialMartingalePolytope) {
  LinearProgram p(3, Sense::maximize);
  p.objective = {1.0, 0.0, 0.0};
  p.add_constraint({2.0, 1.0, 0.5}, Relation::equal, 1.0);
  p.add_constraint({1.0, 1.0, 1.0}, Relation::equal, 1.0);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.value, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.point[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.point[1], 0.0, 1e-12);
  EXPECT_NEAR(s.point[2], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(lp::dual_objective(p, s), s.value, 1e-9);
}

TEST(LpSolve, Unbounded) {
  LinearProgram p(2, Sense::maximize);
  p.objective = {1.0, 0.0};
  p.add_constraint({1.0, -1.0}, Relation::less_equal, 1.0);
  EXPECT_EQ(lp::solve(p).status, Status::unbounded);
}

TEST(LpSolve, FreeAndMirroredVariables) {
  // minimize x - y with x in (-inf, 3], y in [-2, 5], x + y >= -4
  LinearProgram p(2, Sense::minimize);
  p.objective = {1.0, -1.0};
  p.lower = {-kInfinity, -2.0};
  p.upper = {3.0, 5.0};
  p.add_constraint({1.0, 1.0}, Relation::greater_equal, -4.0);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.value, -9.0 - 5.0, 1e-12);
  EXPECT_NEAR(lp::dual_objective(p, s), s.value, 1e-9);
}

TEST(LpSolve, MalformedProgramThrows) {
  LinearProgram p(2, Sense::maximize);
  p.add_constraint(std::vector<double>{1.0}, Relation::less_equal, 1.0);
  try {
    (void)lp::solve(p);
    FAIL() << "expected malformed-program";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::malformed_program);
  }
  LinearProgram q(1);
  q.lower[0] = std::nan("");
  EXPECT_THROW((void)lp::solve(q), Error);
}

TEST(LpSolve, RedundantEqualities) {
  LinearProgram p(3, Sense::minimize);
  p.objective = {1.0, 2.0, 3.0};
  p.add_constraint({1.0, 1.0, 1.0}, Relation::equal, 1.0);
  p.add_constraint({2.0, 2.0, 2.0}, Relation::equal, 2.0);
  p.add_constraint({1.0, 0.0, 1.0}, Relation::greater_equal, 0.5);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.value, 1.0, 1e-12);
  EXPECT_NEAR(lp::dual_objective(p, s), s.value, 1e-9);
}

TEST(LpSolve, DegenerateCyclingExample) {
  // Beale's classic cycling program; Bland's rule must terminate at -1/20.
  LinearProgram p(4, Sense::minimize);
  p.objective = {-0.75, 150.0, -0.02, 6.0};
  p.add_constraint({0.25, -60.0, -0.04, 9.0}, Relation::less_equal, 0.0);
  p.add_constraint({0.5, -90.0, -0.02, 3.0}, Relation::less_equal, 0.0);
  p.add_constraint({0.0, 0.0, 1.0, 0.0}, Relation::less_equal, 1.0);
  const auto s = lp::solve(p);
  ASSERT_EQ(s.status, Status::optimal);
  EXPECT_NEAR(s.value, -0.05, 1e-12);
}

TEST(LpProperties, MatchesVertexOracleAndStrongDuality) {
  std::mt19937_64 rng(7);
  int optimal = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const auto p = random_box_program(rng, n, 1 + trial % 4);
    const auto s = lp::solve(p);
    const auto oracle = vertex_oracle(p);
    if (!oracle) {
      EXPECT_EQ(s.status, Status::infeasible) << "trial " << trial;
      continue;
    }
    ASSERT_EQ(s.status, Status::optimal) << "trial " << trial;
    ++optimal;
    EXPECT_NEAR(s.value, *oracle, 1e-9) << "trial " << trial;
    EXPECT_NEAR(lp::dual_objective(p, s), s.value, 1e-7) << "trial " << trial;
    // Primal feasibility and complementary slackness.
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
      const auto& c = p.constraints[i];
      const double lhs = std::inner_product(c.coefficients.begin(), c.coefficients.end(), s.point.begin(), 0.0);
      if (c.relation != Relation::greater_equal) EXPECT_LE(lhs, c.bound + 1e-9);
      if (c.relation != Relation::less_equal) EXPECT_GE(lhs, c.bound - 1e-9);
      if (c.relation != Relation::equal) EXPECT_LE(std::abs(s.dual_point[i] * (lhs - c.bound)), 1e-7);
    }
  }
  EXPECT_GT(optimal, 200);
}

TEST(LpProperties, RowPermutationInvariance) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_box_program(rng, 3, 4);
    const auto a = lp::solve(p);
    std::shuffle(p.constraints.begin(), p.constraints.end(), rng);
    const auto b = lp::solve(p);
    ASSERT_EQ(a.status, b.status);
    if (a.status == Status::optimal) EXPECT_NEAR(a.value, b.value, 1e-9);
  }
}
