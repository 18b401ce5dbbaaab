#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rlmpc/milp.hpp"
#include "rlmpc/mld.hpp"

namespace rlmpc {

/// One step's slice of the horizon decision vector, in the documented
/// order: continuous block [u_c; z], discrete block [u_d; delta].
struct StepDecision {
  Vector u_c, z, u_d, delta;
};

MldStep to_mld_step(const StepDecision& d);

/// Index arithmetic for the stacked decision vector
///   epsilon = [eps_c; eps_d],
///   eps_c = [u_c(0), z(0), ..., u_c(N_p-1), z(N_p-1)],
///   eps_d = [u_d(0), delta(0), ..., u_d(N_p-1), delta(N_p-1)],
/// plus the per-step layout of the exogenous window gamma.
struct HorizonLayout {
  int n_p = 1;
  MldDims dims;
  int gamma_per_step = 0;
  std::vector<std::string> cont_names;   ///< per-step, size m_c + r_c
  std::vector<std::string> disc_names;   ///< per-step, size m_d + r_d
  std::vector<std::string> state_names;  ///< size n, used for trajectory output

  int cont_per_step() const { return dims.m_c + dims.r_c; }
  int disc_per_step() const { return dims.m_d + dims.r_d; }
  Index num_cont() const { return static_cast<Index>(n_p) * cont_per_step(); }
  Index num_disc() const { return static_cast<Index>(n_p) * disc_per_step(); }
  Index num_vars() const { return num_cont() + num_disc(); }
  Index gamma_len() const { return static_cast<Index>(n_p) * gamma_per_step; }

  Index cont_index(int l, int j) const {
    return static_cast<Index>(l) * cont_per_step() + j;
  }
  Index disc_index(int l, int j) const {
    return num_cont() + static_cast<Index>(l) * disc_per_step() + j;
  }
  Vector gamma_step(const Vector& gamma, int l) const {
    return gamma.segment(static_cast<Index>(l) * gamma_per_step, gamma_per_step);
  }

  Vector pack(const std::vector<StepDecision>& steps) const;
  std::vector<StepDecision> unpack(const Vector& eps) const;
};

/// A finite-horizon problem over an MLD system with linear stage costs and
/// right-hand sides parameterized by the per-step exogenous slice.
struct MpcProblem {
  MldSystem system;
  HorizonLayout layout;
  /// gamma_l -> per-step cost slice of length cont_per_step + disc_per_step
  std::function<Vector(const Vector&)> stage_cost;
  /// gamma_l -> per-step addition to E5 (length q); null means zero
  std::function<Vector(const Vector&)> stage_rhs;
  /// linear terminal weights on x(k+N_p); empty means zero. Only the
  /// decision-dependent part enters the compiled cost vector.
  Vector terminal_cost;
};

/// Compiles the horizon problem at the given augmented state into a compact
/// MILP over epsilon. States are eliminated by substituting the dynamics, so
/// the decision vector is exactly the stacked [eps_c; eps_d]; every discrete
/// coordinate carries a [0,1] bound, which the LP layer folds into rows.
/// Throws std::invalid_argument on layout mismatch.
CompactMilp build_milp(const MpcProblem& p, const AugmentedState& chi);

/// The LP left after fixing all discrete coordinates of the horizon.
FixedLp fix_discrete(const MpcProblem& p, const AugmentedState& chi,
                     const Vector& eps_d);

/// The l=0 slice of a full-length primal, in documented order.
StepDecision extract_first_input(const Vector& primal, const HorizonLayout& layout);

/// State trajectory x(k..k+N_p) implied by the dynamics for a decision
/// vector; row l holds x(k+l). Pure algebra, no binary validation.
Matrix implied_states(const MpcProblem& p, const Vector& x0, const Vector& eps);

struct RhRecord {
  int k = 0;
  AugmentedState chi;
  Vector epsilon;       ///< full horizon solution actually applied (post-fallback)
  StepDecision first;
  double stage_cost = 0.0;
  std::string status;   ///< "optimal", "infeasible_fallback", "iterationlimit_fallback", "infeasible_exact"
  double wall_time_s = 0.0;
  bool fallback_used = false;
};

struct RhResult {
  std::vector<RhRecord> steps;
  int fallback_count = 0;
  double total_stage_cost = 0.0;
  Vector final_state;
};

/// Layout-packed exogenous window starting at absolute step k.
using GammaWindow = std::function<Vector(int)>;
/// chi -> eps_d of length num_disc; an unset function means "exact" (the
/// step is solved as a MILP).
using DiscretePolicy = std::function<Vector(const AugmentedState&)>;

/// Receding-horizon closed loop: solve, apply the first input, advance the
/// state through the dynamics and the window by one step. A policy step
/// whose LP is infeasible falls back to the exact MILP and is counted; the
/// run never aborts.
RhResult receding_horizon_run(const MpcProblem& p, const Vector& x0, int start_k,
                              int steps, const GammaWindow& window,
                              const DiscretePolicy& policy = nullptr,
                              const BnbConfig& bnb = {});

void write_trajectory_csv(const RhResult& result, const HorizonLayout& layout,
                          const std::string& path);

}  // namespace rlmpc
