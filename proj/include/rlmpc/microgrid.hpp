#pragma once

#include <string>
#include <vector>

#include "rlmpc/mpc.hpp"

namespace rlmpc::microgrid {

/// Plant parameters; defaults give the benchmark configuration. Note the
/// dispatchable units default to all-or-nothing operation (min output equal
/// to max output); both limits are configurable.
struct MicrogridParams {
  double x_b_max = 250.0;      ///< storage level upper bound [kWh]
  double x_b_min = 25.0;       ///< storage level lower bound [kWh]
  double p_grid_max = 1000.0;  ///< grid exchange bounds [kW]
  double p_grid_min = -1000.0;
  double p_b_max = 100.0;      ///< storage power bounds [kW]
  double p_b_min = -100.0;
  double p_dis_max = 100.0;    ///< dispatchable unit output bounds [kW]
  double p_dis_min = 100.0;
  double eta_c = 0.9;          ///< charging efficiency
  double eta_d = 0.9;          ///< discharging efficiency
  int n_gen = 3;
  double t_s = 0.5;            ///< sampling time [h]
};

/// Throws std::invalid_argument when a parameter is out of its domain.
void validate_params(const MicrogridParams& p);

std::string params_to_json(const MicrogridParams& p);
MicrogridParams params_from_json(const std::string& text);
void save_params(const MicrogridParams& p, const std::string& path);
MicrogridParams load_params(const std::string& path);

/// Per-step exogenous slice, packed as [c_buy, c_sell, c_prod, P_res, P_load].
struct ExogenousStep {
  double c_buy = 0.0;
  double c_sell = 0.0;
  double c_prod = 0.0;
  double p_res = 0.0;
  double p_load = 0.0;
};

inline constexpr int kGammaPerStep = 5;

Vector pack_exogenous(const ExogenousStep& e);
ExogenousStep unpack_exogenous(const Vector& gamma_l);

/// Strict-side offset that closes the open "P < 0" branch of the sign
/// indicators: delta = 0 forces P <= -kSignOffset [kW].
inline constexpr double kSignOffset = 1e-4;

/// Inequality-row indices of the balance pair inside the per-step block.
inline constexpr int kBalanceRowUpper = 12;
inline constexpr int kBalanceRowLower = 13;

/// The microgrid as an MLD system.
///
/// State: x_b. Continuous inputs [P_b, P_grid, P_dis_1..N_gen]; discrete
/// inputs [delta_dis_1..N_gen]; auxiliary binaries [delta_b, delta_grid];
/// auxiliary continuous [z_b, z_grid].
///
/// Rows, in order: sign-indicator pairs for (delta_b, P_b) and
/// (delta_grid, P_grid); big-M quadruples binding z_b = delta_b*P_b and
/// z_grid = delta_grid*P_grid; the power balance as two opposing
/// inequalities (P_res and P_load enter through the per-step rhs); P_b,
/// P_grid bounds; gated generator bounds; storage level bounds on the
/// current and the successor state.
MldSystem build_mld(const MicrogridParams& p);

/// Linear cost coefficients over the per-step continuous block
/// [P_b, P_grid, P_dis_1..N_gen, z_b, z_grid]: production cost plus grid
/// cost, with zero weight on P_b and z_b.
Vector stage_cost_coefficients(const MicrogridParams& p, const ExogenousStep& e);

/// The full horizon problem: build_mld + stage costs + the balance-row
/// exogenous rhs; no terminal cost.
MpcProblem build_mpc_problem(const MicrogridParams& p, int n_p);

/// All 2^(N_gen+2) assignments of the per-step discrete slice
/// [delta_dis_1..N_gen, delta_b, delta_grid] in lexicographic order: the
/// first slice coordinate is the most significant bit, so entry 0 is all
/// zeros and the last entry all ones.
std::vector<Vector> sub_action_space(const MicrogridParams& p);

int sub_action_count(const MicrogridParams& p);
Vector sub_action_from_index(int index, int bits);
int sub_action_to_index(const Vector& bits_vec);

}  // namespace rlmpc::microgrid
