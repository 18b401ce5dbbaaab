#pragma once

#include <string>
#include <vector>

#include "rlmpc/types.hpp"

namespace rlmpc {

/// Dimension bookkeeping for a mixed-logical dynamical system. States,
/// inputs, and auxiliary variables are each split into a continuous and a
/// discrete part; the discrete coordinates take values in {0,1}.
struct MldDims {
  int n_c = 0;  ///< continuous states
  int n_d = 0;  ///< discrete states
  int m_c = 0;  ///< continuous inputs
  int m_d = 0;  ///< discrete inputs
  int r_c = 0;  ///< continuous auxiliaries (z)
  int r_d = 0;  ///< discrete auxiliaries (delta)

  int n() const { return n_c + n_d; }
  int m() const { return m_c + m_d; }
};

/// A mixed-logical dynamical system
///
///   x(k+1) = A x(k) + B1 u(k) + B2 delta(k) + B3 z(k) + B5
///   E2 delta(k) + E3 z(k) <= E1 u(k) + E4 x(k) + E5
///
/// with u = [u_c; u_d], x = [x_c; x_d]. Immutable after construction;
/// all operations on it are pure functions.
struct MldSystem {
  MldDims dims;
  Matrix A;   ///< n x n
  Matrix B1;  ///< n x m
  Matrix B2;  ///< n x r_d
  Matrix B3;  ///< n x r_c
  Vector B5;  ///< n
  Matrix E1;  ///< q x m
  Matrix E2;  ///< q x r_d
  Matrix E3;  ///< q x r_c
  Matrix E4;  ///< q x n
  Vector E5;  ///< q

  Index rows() const { return E5.size(); }
};

/// One step's worth of decision variables: inputs plus auxiliaries.
struct MldStep {
  Vector u;      ///< length m; coordinates m_c..m-1 must be exactly 0 or 1
  Vector delta;  ///< length r_d; entries exactly 0 or 1
  Vector z;      ///< length r_c
};

/// State augmented with the exogenous forecast window for the current
/// horizon: chi(k) = [x(k); gamma(k)].
struct AugmentedState {
  Vector x;
  Vector gamma;
};

struct ValidationIssue {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

/// Checks that all matrix shapes are consistent with dims and that every
/// entry is finite. Violations are reported, never thrown.
ValidationReport validate(const MldSystem& system);

/// Evaluates x(k+1) = A x + B1 u + B2 delta + B3 z + B5.
/// Throws std::invalid_argument on dimension mismatch or when a discrete
/// coordinate of the step is not exactly 0 or 1.
Vector step(const MldSystem& system, const Vector& x, const MldStep& s);

struct ConstraintCheck {
  bool satisfied = false;
  double max_residual = 0.0;  ///< max over rows of E2 d + E3 z - E1 u - E4 x - E5
  Index worst_row = -1;
};

/// Componentwise check of the MLD inequality block at tolerance tol.
ConstraintCheck check_constraints(const MldSystem& system, const Vector& x,
                                  const MldStep& s, double tol = kFeasTol);

/// JSON round-trip with field names dims, A, B1, B2, B3, B5, E1, E2, E3,
/// E4, E5. Matrices are stored as arrays of rows.
void save_mld_system(const MldSystem& system, const std::string& path);
MldSystem load_mld_system(const std::string& path);
std::string mld_system_to_json(const MldSystem& system);
MldSystem mld_system_from_json(const std::string& text);

}  // namespace rlmpc
