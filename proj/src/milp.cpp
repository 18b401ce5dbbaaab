#include "rlmpc/milp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

namespace rlmpc {

const char* to_string(MilpStatus status) {
  switch (status) {
    case MilpStatus::Optimal: return "Optimal";
    case MilpStatus::Infeasible: return "Infeasible";
    case MilpStatus::NodeLimit: return "NodeLimit";
  }
  return "?";
}

namespace {

void validate_binary_indices(const CompactMilp& m) {
  const Index p = m.lp.num_vars();
  Index prev = -1;
  for (Index idx : m.binary_indices) {
    if (idx < 0 || idx >= p)
      throw std::invalid_argument("binary index out of range");
    if (idx <= prev)
      throw std::invalid_argument("binary indices must be sorted and unique");
    prev = idx;
  }
}

struct Node {
  std::vector<int8_t> fix;  // per binary: -1 free, 0 or 1 fixed
  double bound;             // relaxation value of the parent
  long id;
  int depth;
};

struct BestBoundOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
    return a.id > b.id;
  }
};

}  // namespace

FixedLp fix_binaries(const CompactMilp& m, const Vector& eps_d) {
  validate_binary_indices(m);
  const Index p = m.lp.num_vars();
  const Index nb = static_cast<Index>(m.binary_indices.size());
  if (eps_d.size() != nb)
    throw std::invalid_argument("fix_binaries: eps_d length mismatch");
  for (Index i = 0; i < nb; ++i)
    if (eps_d[i] != 0.0 && eps_d[i] != 1.0)
      throw std::invalid_argument("fix_binaries: eps_d entries must be 0 or 1");

  std::vector<bool> is_binary(static_cast<size_t>(p), false);
  for (Index idx : m.binary_indices) is_binary[static_cast<size_t>(idx)] = true;

  FixedLp out;
  out.continuous_indices.reserve(static_cast<size_t>(p - nb));
  for (Index j = 0; j < p; ++j)
    if (!is_binary[static_cast<size_t>(j)]) out.continuous_indices.push_back(j);
  const Index pc = static_cast<Index>(out.continuous_indices.size());

  Vector shift = Vector::Zero(m.lp.num_rows());
  for (Index i = 0; i < nb; ++i)
    shift += m.lp.G.col(m.binary_indices[static_cast<size_t>(i)]) * eps_d[i];
  const Vector h_new = m.lp.h - shift;

  // Rows with no continuous coefficients are constant checks: satisfied ones
  // are dropped, violated ones are kept so the LP reports Infeasible.
  Matrix g_cont(m.lp.num_rows(), pc);
  for (Index j = 0; j < pc; ++j)
    g_cont.col(j) = m.lp.G.col(out.continuous_indices[static_cast<size_t>(j)]);
  std::vector<Index> keep;
  keep.reserve(static_cast<size_t>(m.lp.num_rows()));
  for (Index r = 0; r < m.lp.num_rows(); ++r) {
    const bool has_cont = pc > 0 && g_cont.row(r).cwiseAbs().maxCoeff() > 0.0;
    if (has_cont || h_new[r] < -1e-9) keep.push_back(r);
  }

  out.lp.c.resize(pc);
  for (Index j = 0; j < pc; ++j)
    out.lp.c[j] = m.lp.c[out.continuous_indices[static_cast<size_t>(j)]];
  out.lp.G.resize(static_cast<Index>(keep.size()), pc);
  out.lp.h.resize(static_cast<Index>(keep.size()));
  for (Index r = 0; r < static_cast<Index>(keep.size()); ++r) {
    out.lp.G.row(r) = g_cont.row(keep[static_cast<size_t>(r)]);
    out.lp.h[r] = h_new[keep[static_cast<size_t>(r)]];
  }
  if (m.lp.lo.size() == p) {
    out.lp.lo.resize(pc);
    for (Index j = 0; j < pc; ++j)
      out.lp.lo[j] = m.lp.lo[out.continuous_indices[static_cast<size_t>(j)]];
  }
  if (m.lp.hi.size() == p) {
    out.lp.hi.resize(pc);
    for (Index j = 0; j < pc; ++j)
      out.lp.hi[j] = m.lp.hi[out.continuous_indices[static_cast<size_t>(j)]];
  }

  for (Index i = 0; i < nb; ++i)
    out.objective_offset += m.lp.c[m.binary_indices[static_cast<size_t>(i)]] * eps_d[i];
  return out;
}

Vector assemble_full_primal(const CompactMilp& m, const FixedLp& fixed,
                            const Vector& eps_c, const Vector& eps_d) {
  Vector full(m.lp.num_vars());
  for (Index i = 0; i < static_cast<Index>(m.binary_indices.size()); ++i)
    full[m.binary_indices[static_cast<size_t>(i)]] = eps_d[i];
  for (Index j = 0; j < static_cast<Index>(fixed.continuous_indices.size()); ++j)
    full[fixed.continuous_indices[static_cast<size_t>(j)]] = eps_c[j];
  return full;
}

MilpSolution solve_milp(const CompactMilp& m, const BnbConfig& cfg) {
  validate_binary_indices(m);
  if (cfg.integrality_tol <= 0 || cfg.rel_gap_tol <= 0)
    throw std::invalid_argument("solve_milp: tolerances must be positive");

  const auto t_start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
        .count();
  };

  const Index nb = static_cast<Index>(m.binary_indices.size());
  MilpSolution sol;

  LinearProgram node_lp = m.lp;
  const Index p = m.lp.num_vars();
  const Vector base_lo =
      m.lp.lo.size() == p ? m.lp.lo : Vector::Constant(p, -kInf);
  const Vector base_hi =
      m.lp.hi.size() == p ? m.lp.hi : Vector::Constant(p, kInf);

  const auto solve_node = [&](const std::vector<int8_t>& fix) {
    node_lp.lo = base_lo;
    node_lp.hi = base_hi;
    for (Index i = 0; i < nb; ++i) {
      const Index j = m.binary_indices[static_cast<size_t>(i)];
      if (fix[static_cast<size_t>(i)] == 0) {
        node_lp.lo[j] = 0.0;
        node_lp.hi[j] = 0.0;
      } else if (fix[static_cast<size_t>(i)] == 1) {
        node_lp.lo[j] = 1.0;
        node_lp.hi[j] = 1.0;
      }
    }
    return solve_lp(node_lp);
  };

  bool have_incumbent = false;
  double incumbent_obj = kInf;
  Vector incumbent_primal;

  // Accepts a node whose binaries all sit on integer values: re-solve with
  // the binaries pinned exactly so the reported primal is clean.
  const auto try_incumbent = [&](const Vector& relax_primal, double node_bound) {
    Vector eps_d(nb);
    for (Index i = 0; i < nb; ++i)
      eps_d[i] = std::round(relax_primal[m.binary_indices[static_cast<size_t>(i)]]);
    const FixedLp fixed = fix_binaries(m, eps_d);
    const LpSolution fixed_sol = solve_lp(fixed.lp);
    if (fixed_sol.status != LpStatus::Optimal) return false;
    const double obj = fixed_sol.objective + fixed.objective_offset;
    if (cfg.debug_checks && obj < node_bound - 1e-6)
      throw std::logic_error("bnb: integral objective below node bound");
    if (!have_incumbent || obj < incumbent_obj - 1e-12) {
      have_incumbent = true;
      incumbent_obj = obj;
      incumbent_primal = assemble_full_primal(m, fixed, fixed_sol.primal, eps_d);
    }
    return true;
  };

  const auto prune_threshold = [&] {
    return incumbent_obj - cfg.rel_gap_tol * std::max(1.0, std::abs(incumbent_obj));
  };

  std::vector<Node> stack;
  std::priority_queue<Node, std::vector<Node>, BestBoundOrder> heap;
  long next_id = 0;

  stack.push_back(Node{std::vector<int8_t>(static_cast<size_t>(nb), -1),
                       -kInf, next_id++, 0});

  const bool best_bound_mode = cfg.node_strategy == NodeStrategy::BestBound;
  bool diving = best_bound_mode;  // depth-first until the first incumbent

  const auto pop_node = [&](Node& out) {
    if (best_bound_mode && !diving) {
      if (!stack.empty()) {
        // flush the remaining dive nodes into the heap
        for (auto& n : stack) heap.push(std::move(n));
        stack.clear();
      }
      if (heap.empty()) return false;
      out = heap.top();
      heap.pop();
      return true;
    }
    if (stack.empty()) {
      if (best_bound_mode && !heap.empty()) {
        out = heap.top();
        heap.pop();
        return true;
      }
      return false;
    }
    out = std::move(stack.back());
    stack.pop_back();
    return true;
  };

  while (true) {
    Node node;
    if (!pop_node(node)) break;
    if (have_incumbent && node.bound >= prune_threshold()) {
      if (best_bound_mode && !diving) {
        // heap is ordered by bound: everything left is pruned too
        while (!heap.empty()) heap.pop();
      }
      continue;
    }
    if (sol.nodes_explored >= cfg.node_limit) {
      // record the unexplored bound before giving up
      sol.best_bound = node.bound;
      sol.status = MilpStatus::NodeLimit;
      break;
    }

    const LpSolution relax = solve_node(node.fix);
    ++sol.nodes_explored;
    if (relax.status == LpStatus::Infeasible) continue;
    if (relax.status == LpStatus::Unbounded)
      throw std::runtime_error("solve_milp: unbounded relaxation");

    double node_value;
    Index branch_var = -1;
    double branch_frac = -1.0;
    bool all_integral = true;

    if (relax.status == LpStatus::IterationLimit) {
      // numerical failure: keep searching below with the parent bound
      node_value = node.bound;
      all_integral = false;
      for (Index i = 0; i < nb && branch_var < 0; ++i)
        if (node.fix[static_cast<size_t>(i)] < 0) branch_var = i;
      if (branch_var < 0) continue;  // fully fixed and unsolvable; give up on it
    } else {
      node_value = relax.objective;
      if (cfg.debug_checks && node.bound > -kInf &&
          node_value < node.bound - 1e-6)
        throw std::logic_error("bnb: child bound below parent bound");
      if (have_incumbent && node_value >= prune_threshold()) continue;

      for (Index i = 0; i < nb; ++i) {
        if (node.fix[static_cast<size_t>(i)] >= 0) continue;
        const double v = relax.primal[m.binary_indices[static_cast<size_t>(i)]];
        const double frac = std::abs(v - std::round(v));
        if (frac > cfg.integrality_tol) {
          all_integral = false;
          if (cfg.branch_rule == BranchRule::FirstFractional) {
            branch_var = i;
            break;
          }
          if (frac > branch_frac + 1e-15) {
            branch_frac = frac;
            branch_var = i;
          }
        }
      }

      if (all_integral) {
        if (try_incumbent(relax.primal, node_value)) {
          if (diving) diving = false;
          continue;
        }
        // Rounding crossed a feasibility edge (large big-M rows can amplify
        // a tol-level fractionality); branch on a free coordinate instead.
        for (Index i = 0; i < nb && branch_var < 0; ++i)
          if (node.fix[static_cast<size_t>(i)] < 0) branch_var = i;
        if (branch_var < 0) continue;
      }
    }

    // children: dive first toward the relaxation value
    int8_t near_val = 1;
    if (relax.status == LpStatus::Optimal) {
      const double v = relax.primal[m.binary_indices[static_cast<size_t>(branch_var)]];
      near_val = static_cast<int8_t>(std::round(v) >= 1.0 ? 1 : 0);
    }
    Node child_far{node.fix, node_value, next_id++, node.depth + 1};
    child_far.fix[static_cast<size_t>(branch_var)] = static_cast<int8_t>(1 - near_val);
    Node child_near{node.fix, node_value, next_id++, node.depth + 1};
    child_near.fix[static_cast<size_t>(branch_var)] = near_val;

    if (best_bound_mode && !diving) {
      heap.push(std::move(child_far));
      heap.push(std::move(child_near));
    } else {
      stack.push_back(std::move(child_far));
      stack.push_back(std::move(child_near));
    }
  }

  sol.wall_time_s = elapsed();
  if (sol.status == MilpStatus::NodeLimit) {
    if (have_incumbent) {
      sol.primal = incumbent_primal;
      sol.objective = incumbent_obj;
    }
    // open nodes still bound the optimum from below
    double lb = sol.best_bound;
    for (const auto& n : stack) lb = std::min(lb, n.bound);
    while (!heap.empty()) {
      lb = std::min(lb, heap.top().bound);
      heap.pop();
    }
    sol.best_bound = lb;
    return sol;
  }
  if (have_incumbent) {
    sol.status = MilpStatus::Optimal;
    sol.primal = incumbent_primal;
    sol.objective = incumbent_obj;
    sol.best_bound = incumbent_obj;
  } else {
    sol.status = MilpStatus::Infeasible;
  }
  return sol;
}

}  // namespace rlmpc
