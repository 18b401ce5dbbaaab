#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "rlmpc/mld.hpp"

using namespace rlmpc;

namespace {

MldSystem identity_system() {
  MldSystem s;
  s.dims = {1, 0, 1, 0, 0, 0};
  s.A = Matrix::Identity(1, 1);
  s.B1 = Matrix::Zero(1, 1);
  s.B2 = Matrix::Zero(1, 0);
  s.B3 = Matrix::Zero(1, 0);
  s.B5 = Vector::Zero(1);
  s.E1 = Matrix::Zero(0, 1);
  s.E2 = Matrix::Zero(0, 0);
  s.E3 = Matrix::Zero(0, 0);
  s.E4 = Matrix::Zero(0, 1);
  s.E5 = Vector::Zero(0);
  return s;
}

// Storage-unit dynamics x' = x + Ts*(eta_c - 1/eta_d)*z_b + (Ts/eta_d)*P_b,
// hand-assembled straight from the linearized storage equation.
MldSystem storage_system(double ts, double eta_c, double eta_d) {
  MldSystem s;
  s.dims = {1, 0, 1, 0, 1, 1};
  s.A = Matrix::Identity(1, 1);
  s.B1 = Matrix::Constant(1, 1, ts / eta_d);
  s.B2 = Matrix::Zero(1, 1);
  s.B3 = Matrix::Constant(1, 1, ts * (eta_c - 1.0 / eta_d));
  s.B5 = Vector::Zero(1);
  s.E1 = Matrix::Zero(0, 1);
  s.E2 = Matrix::Zero(0, 1);
  s.E3 = Matrix::Zero(0, 1);
  s.E4 = Matrix::Zero(0, 1);
  s.E5 = Vector::Zero(0);
  return s;
}

MldStep storage_step(double p_b, double delta_b, double z_b) {
  MldStep st;
  st.u = Vector::Constant(1, p_b);
  st.delta = Vector::Constant(1, delta_b);
  st.z = Vector::Constant(1, z_b);
  return st;
}

}  // namespace

TEST_CASE("validate accepts a consistent 1-state 1-input system") {
  CHECK(validate(identity_system()).ok());
}

TEST_CASE("validate names the offending matrix and shapes") {
  MldSystem s = storage_system(0.5, 0.9, 0.9);
  s.B2 = Matrix::Zero(3, 1);  // wrong row count
  const ValidationReport r = validate(s);
  REQUIRE_FALSE(r.ok());
  CHECK(r.issues[0].field == "B2");
  CHECK(r.issues[0].message.find("expected 1x1") != std::string::npos);
  CHECK(r.issues[0].message.find("got 3x1") != std::string::npos);
}

TEST_CASE("validate flags non-finite entries") {
  MldSystem s = identity_system();
  s.E1 = Matrix::Zero(1, 1);
  s.E2 = Matrix::Zero(1, 0);
  s.E3 = Matrix::Zero(1, 0);
  s.E4 = Matrix::Zero(1, 1);
  s.E5 = Vector::Constant(1, std::numeric_limits<double>::quiet_NaN());
  const ValidationReport r = validate(s);
  REQUIRE_FALSE(r.ok());
  CHECK(r.issues[0].field == "E5");
  CHECK(r.issues[0].message.find("non-finite") != std::string::npos);
}

TEST_CASE("step of the identity system returns the state") {
  const MldSystem s = identity_system();
  MldStep st;
  st.u = Vector::Constant(1, 3.25);
  st.delta = Vector::Zero(0);
  st.z = Vector::Zero(0);
  const Vector x = Vector::Constant(1, -7.5);
  CHECK(step(s, x, st)[0] == doctest::Approx(-7.5));
}

TEST_CASE("storage dynamics match the charging branch") {
  const MldSystem s = storage_system(0.5, 0.9, 0.9);
  const Vector x = Vector::Constant(1, 100.0);
  // charging: z_b = P_b, next level = x + Ts*eta_c*P_b
  const Vector next = step(s, x, storage_step(50.0, 1.0, 50.0));
  CHECK(next[0] == doctest::Approx(122.5).epsilon(1e-12));
}

TEST_CASE("storage dynamics match the discharging branch") {
  const MldSystem s = storage_system(0.5, 0.9, 0.9);
  const Vector x = Vector::Constant(1, 100.0);
  const Vector next = step(s, x, storage_step(-50.0, 0.0, 0.0));
  CHECK(next[0] == doctest::Approx(100.0 - 0.5 / 0.9 * 50.0).epsilon(1e-12));
}

TEST_CASE("step rejects dimension mismatches and non-binary discretes") {
  const MldSystem s = storage_system(0.5, 0.9, 0.9);
  MldStep st = storage_step(1.0, 1.0, 1.0);
  CHECK_THROWS_AS(step(s, Vector::Zero(2), st), std::invalid_argument);
  st.delta[0] = 0.5;
  CHECK_THROWS_AS(step(s, Vector::Zero(1), st), std::invalid_argument);
}

TEST_CASE("step is affine: superposition holds up to B5") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  MldSystem s;
  s.dims = {2, 0, 2, 1, 2, 1};
  const int n = 2, m = 3;
  auto rand_mat = [&](int r, int c) {
    Matrix mm(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) mm(i, j) = g(rng);
    return mm;
  };
  s.A = rand_mat(n, n);
  s.B1 = rand_mat(n, m);
  s.B2 = rand_mat(n, 1);
  s.B3 = rand_mat(n, 2);
  s.B5 = rand_mat(n, 1).col(0);
  s.E1 = Matrix::Zero(0, m);
  s.E2 = Matrix::Zero(0, 1);
  s.E3 = Matrix::Zero(0, 2);
  s.E4 = Matrix::Zero(0, n);
  s.E5 = Vector::Zero(0);

  for (int trial = 0; trial < 20; ++trial) {
    Vector x1 = rand_mat(n, 1).col(0), x2 = rand_mat(n, 1).col(0);
    MldStep s1, s2, sum;
    s1.u = rand_mat(m, 1).col(0);
    s1.u[2] = 1.0;  // discrete input coordinate
    s1.delta = Vector::Constant(1, 1.0);
    s1.z = rand_mat(2, 1).col(0);
    // the second step has zero discrete parts so the sum stays binary
    s2.u = rand_mat(m, 1).col(0);
    s2.u[2] = 0.0;
    s2.delta = Vector::Zero(1);
    s2.z = rand_mat(2, 1).col(0);
    sum.u = s1.u + s2.u;
    sum.delta = s1.delta + s2.delta;
    sum.z = s1.z + s2.z;
    const Vector lhs = step(s, x1 + x2, sum);
    const Vector rhs = step(s, x1, s1) + step(s, x2, s2) - s.B5;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("check_constraints on an all-zero system") {
  MldSystem s = identity_system();
  s.E1 = Matrix::Zero(2, 1);
  s.E2 = Matrix::Zero(2, 0);
  s.E3 = Matrix::Zero(2, 0);
  s.E4 = Matrix::Zero(2, 1);
  s.E5 = Vector::Zero(2);
  MldStep st;
  st.u = Vector::Zero(1);
  st.delta = Vector::Zero(0);
  st.z = Vector::Zero(0);
  const ConstraintCheck c = check_constraints(s, Vector::Zero(1), st);
  CHECK(c.satisfied);
  CHECK(c.max_residual == doctest::Approx(0.0));
}

TEST_CASE("check_constraints reports the worst violation") {
  // single row: z <= u  (E3 z <= E1 u)
  MldSystem s = storage_system(0.5, 0.9, 0.9);
  s.E1 = Matrix::Constant(1, 1, 1.0);
  s.E2 = Matrix::Zero(1, 1);
  s.E3 = Matrix::Constant(1, 1, 1.0);
  s.E4 = Matrix::Zero(1, 1);
  s.E5 = Vector::Zero(1);
  const ConstraintCheck bad =
      check_constraints(s, Vector::Zero(1), storage_step(1.0, 1.0, 2.0));
  CHECK_FALSE(bad.satisfied);
  CHECK(bad.max_residual == doctest::Approx(1.0));
  CHECK(bad.worst_row == 0);
  const ConstraintCheck good =
      check_constraints(s, Vector::Zero(1), storage_step(2.0, 1.0, 2.0));
  CHECK(good.satisfied);
}

TEST_CASE("json round trip preserves every field") {
  const MldSystem s = storage_system(0.5, 0.9, 0.9);
  const std::string text = mld_system_to_json(s);
  const MldSystem back = mld_system_from_json(text);
  CHECK(back.dims.n_c == s.dims.n_c);
  CHECK(back.dims.r_d == s.dims.r_d);
  CHECK((back.A - s.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.B1 - s.B1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.B3 - s.B3).cwiseAbs().maxCoeff() == 0.0);

  const std::string path = "mld_roundtrip_test.json";
  save_mld_system(s, path);
  const MldSystem loaded = load_mld_system(path);
  CHECK((loaded.B1 - s.B1).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}
