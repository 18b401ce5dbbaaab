#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "rlmpc/lp.hpp"

using namespace rlmpc;
using rlmpc::testing::random_bounded_lp;
using rlmpc::testing::vertex_enum_solve;

namespace {

LinearProgram make_lp(const Vector& c, const Matrix& G, const Vector& h) {
  LinearProgram lp;
  lp.c = c;
  lp.G = G;
  lp.h = h;
  return lp;
}

}  // namespace

TEST_CASE("min x subject to 0 <= x <= 5") {
  Matrix G(2, 1);
  G << -1, 1;
  Vector h(2);
  h << 0, 5;
  const LpSolution s = solve_lp(make_lp(Vector::Constant(1, 1.0), G, h));
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.primal[0] == doctest::Approx(0.0));
  CHECK(s.objective == doctest::Approx(0.0));
}

TEST_CASE("min -x subject to x >= 0 is unbounded") {
  Matrix G(1, 1);
  G << -1;
  const LpSolution s =
      solve_lp(make_lp(Vector::Constant(1, -1.0), G, Vector::Zero(1)));
  CHECK(s.status == LpStatus::Unbounded);
}

TEST_CASE("x <= -1 together with x >= 0 is infeasible") {
  Matrix G(2, 1);
  G << 1, -1;
  Vector h(2);
  h << -1, 0;
  const LpSolution s = solve_lp(make_lp(Vector::Constant(1, 1.0), G, h));
  CHECK(s.status == LpStatus::Infeasible);
}

TEST_CASE("objective equals c'primal and the point is feasible") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const LinearProgram lp = random_bounded_lp(rng);
    const LpSolution s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(std::abs(s.objective - lp.c.dot(s.primal)) <=
          1e-9 * (1.0 + std::abs(s.objective)));
    CHECK(((lp.G * s.primal - lp.h).array() <= 1e-6).all());
  }
}

TEST_CASE("matches the vertex-enumeration oracle on 100 random bounded LPs") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 100; ++i) {
    const LinearProgram lp = random_bounded_lp(rng);
    const LpSolution s = solve_lp(lp);
    const auto oracle = vertex_enum_solve(lp);
    REQUIRE(oracle.feasible);
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(std::abs(s.objective - oracle.objective) < 1e-6);
  }
}

TEST_CASE("statuses agree with the oracle on infeasible instances") {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 30; ++i) {
    LinearProgram lp = random_bounded_lp(rng, 4, 8);
    // append a contradictory pair: a'x <= b and -a'x <= -(b + 1)
    const Index p = lp.num_vars();
    const Index q = lp.num_rows();
    Matrix G(q + 2, p);
    Vector h(q + 2);
    G.topRows(q) = lp.G;
    h.head(q) = lp.h;
    Vector a = Vector::Ones(p);
    G.row(q) = a.transpose();
    h[q] = 0.0;
    G.row(q + 1) = -a.transpose();
    h[q + 1] = -1.0;
    lp.G = G;
    lp.h = h;
    const LpSolution s = solve_lp(lp);
    CHECK(s.status == LpStatus::Infeasible);
    CHECK_FALSE(vertex_enum_solve(lp).feasible);
  }
}

TEST_CASE("weak duality spot check against rejection-sampled points") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  for (int i = 0; i < 10; ++i) {
    const LinearProgram lp = random_bounded_lp(rng);
    const LpSolution s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::Optimal);
    int kept = 0;
    for (int t = 0; t < 2000 && kept < 50; ++t) {
      Vector x(lp.num_vars());
      for (Index j = 0; j < x.size(); ++j) x[j] = box(rng);
      if (((lp.G * x - lp.h).array() <= 0.0).all()) {
        ++kept;
        CHECK(lp.c.dot(x) >= s.objective - 1e-7);
      }
    }
  }
}

TEST_CASE("variable bounds fold into constraint rows") {
  LinearProgram lp;
  lp.c = Vector::Constant(2, 1.0);
  lp.G = Matrix::Zero(1, 2);
  lp.G(0, 0) = -1.0;
  lp.G(0, 1) = -1.0;
  lp.h = Vector::Constant(1, -3.0);  // x0 + x1 >= 3
  lp.lo = Vector::Constant(2, 1.0);
  lp.hi = Vector::Constant(2, 10.0);
  const LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(3.0));
  CHECK(s.primal.minCoeff() >= 1.0 - 1e-9);

  lp.lo[0] = 4.0;  // forces x0 = 4 at the optimum corner
  const LpSolution s2 = solve_lp(lp);
  REQUIRE(s2.status == LpStatus::Optimal);
  CHECK(s2.objective == doctest::Approx(5.0));
}

TEST_CASE("deterministic: repeated solves produce identical output") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) {
    const LinearProgram lp = random_bounded_lp(rng);
    const LpSolution a = solve_lp(lp);
    const LpSolution b = solve_lp(lp);
    REQUIRE(a.status == b.status);
    CHECK(a.objective == b.objective);
    CHECK(a.iterations == b.iterations);
    CHECK((a.primal.array() == b.primal.array()).all());
  }
}

TEST_CASE("iteration limit reported as a distinct status") {
  std::mt19937_64 rng(3);
  const LinearProgram lp = random_bounded_lp(rng, 6, 12);
  const LpSolution s = solve_lp(lp, 1);
  CHECK(s.status == LpStatus::IterationLimit);
}

TEST_CASE("degenerate problems still terminate") {
  // many redundant rows through the origin force degenerate pivots
  const int p = 4;
  Matrix G(2 * p + 8, p);
  Vector h(2 * p + 8);
  for (int j = 0; j < p; ++j) {
    G.row(2 * j).setZero();
    G(2 * j, j) = 1.0;
    h[2 * j] = 1.0;
    G.row(2 * j + 1).setZero();
    G(2 * j + 1, j) = -1.0;
    h[2 * j + 1] = 0.0;
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  for (int r = 0; r < 8; ++r) {
    for (int j = 0; j < p; ++j) G(2 * p + r, j) = unit(rng);
    h[2 * p + r] = 0.0;  // active at the origin
  }
  LinearProgram lp;
  lp.c = Vector::Constant(p, 1.0);
  lp.G = G;
  lp.h = h;
  const LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(0.0));
}
