#pragma once

#include "rlmpc/types.hpp"

namespace rlmpc {

/// min c'x  s.t.  G x <= h, lo <= x <= hi.
///
/// lo/hi are optional (empty vectors mean unbounded); finite bounds are
/// folded into additional G rows by the solver. Variables are otherwise
/// free.
struct LinearProgram {
  Vector c;
  Matrix G;
  Vector h;
  Vector lo;  ///< empty or length p; -inf entries mean no lower bound
  Vector hi;  ///< empty or length p; +inf entries mean no upper bound

  Index num_vars() const { return c.size(); }
  Index num_rows() const { return h.size(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  Vector primal;              ///< length p, valid iff Optimal
  double objective = 0.0;     ///< c' primal, valid iff Optimal
  int iterations = 0;         ///< simplex pivots over both phases
};

/// Two-phase primal simplex on the dense tableau. Dantzig pricing with a
/// switch to Bland's rule after kBlandStallThreshold degenerate pivots.
/// Deterministic: identical inputs give identical outputs.
LpSolution solve_lp(const LinearProgram& lp);
LpSolution solve_lp(const LinearProgram& lp, long max_iterations);

inline constexpr double kLpOptTol = 1e-9;  ///< reduced-cost tolerance
inline constexpr int kBlandStallThreshold = 50;

}  // namespace rlmpc
