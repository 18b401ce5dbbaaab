#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>

namespace rlmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Componentwise feasibility tolerance shared by the constraint checkers,
// the LP solver, and the MILP integrality checks.
inline constexpr double kFeasTol = 1e-6;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace rlmpc
