#pragma once

#include <vector>

#include "rlmpc/lp.hpp"
#include "rlmpc/types.hpp"

namespace rlmpc {

/// A linear program with a subset of coordinates restricted to {0,1}.
/// The LP must already carry [0,1] rows or bounds for those coordinates;
/// the builders in this project emit them explicitly.
struct CompactMilp {
  LinearProgram lp;
  std::vector<Index> binary_indices;  ///< sorted, unique, within range
};

enum class NodeStrategy { BestBound, DepthFirst };
enum class BranchRule { MostFractional, FirstFractional };

struct BnbConfig {
  double integrality_tol = 1e-6;
  double rel_gap_tol = 1e-8;
  NodeStrategy node_strategy = NodeStrategy::BestBound;
  BranchRule branch_rule = BranchRule::MostFractional;
  long node_limit = 1000000;
  bool debug_checks = false;  ///< assert bound monotonicity during search
};

enum class MilpStatus { Optimal, Infeasible, NodeLimit };

const char* to_string(MilpStatus status);

struct MilpSolution {
  MilpStatus status = MilpStatus::Infeasible;
  Vector primal;           ///< binaries exact {0,1}, valid unless Infeasible
  double objective = 0.0;  ///< valid unless Infeasible
  double best_bound = 0.0;
  long nodes_explored = 0;
  double wall_time_s = 0.0;
};

/// Branch-and-bound over the binary coordinates. Best-bound node selection
/// with an initial depth-first dive to the first incumbent; branching on the
/// most fractional coordinate, ties to the lowest index.
MilpSolution solve_milp(const CompactMilp& m, const BnbConfig& cfg = {});

/// The LP over the continuous coordinates obtained by fixing the binaries.
struct FixedLp {
  LinearProgram lp;
  double objective_offset = 0.0;         ///< c' contribution of the binaries
  std::vector<Index> continuous_indices; ///< position in the full vector per LP coordinate
};

/// Fixes the binary coordinates of m to eps_d (entries in {0,1}), moving
/// their columns into the right-hand side. Rows that no longer involve any
/// continuous coordinate are kept only if they are violated, so that
/// infeasible assignments are detected by the LP solve.
/// Throws std::invalid_argument on length mismatch or non-binary entries.
FixedLp fix_binaries(const CompactMilp& m, const Vector& eps_d);

/// Scatters an LP solution over the continuous coordinates plus the fixed
/// binaries back into a full-length decision vector.
Vector assemble_full_primal(const CompactMilp& m, const FixedLp& fixed,
                            const Vector& eps_c, const Vector& eps_d);

}  // namespace rlmpc
