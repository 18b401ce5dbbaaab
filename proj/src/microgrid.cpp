#include "rlmpc/microgrid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rlmpc::microgrid {

void validate_params(const MicrogridParams& p) {
  if (!(p.x_b_min < p.x_b_max))
    throw std::invalid_argument("microgrid: x_b_min must be < x_b_max");
  if (!(p.eta_c > 0.0 && p.eta_c <= 1.0) || !(p.eta_d > 0.0 && p.eta_d <= 1.0))
    throw std::invalid_argument("microgrid: efficiencies must lie in (0,1]");
  if (!(p.p_b_min < 0.0 && 0.0 < p.p_b_max))
    throw std::invalid_argument("microgrid: P_b bounds must straddle zero");
  if (!(p.p_grid_min < 0.0 && 0.0 < p.p_grid_max))
    throw std::invalid_argument("microgrid: P_grid bounds must straddle zero");
  if (p.p_dis_min < 0.0 || p.p_dis_max < p.p_dis_min)
    throw std::invalid_argument("microgrid: generator bounds out of order");
  if (p.n_gen < 0) throw std::invalid_argument("microgrid: n_gen must be >= 0");
  if (!(p.t_s > 0.0)) throw std::invalid_argument("microgrid: T_s must be > 0");
}

Vector pack_exogenous(const ExogenousStep& e) {
  Vector g(kGammaPerStep);
  g << e.c_buy, e.c_sell, e.c_prod, e.p_res, e.p_load;
  return g;
}

ExogenousStep unpack_exogenous(const Vector& gamma_l) {
  if (gamma_l.size() != kGammaPerStep)
    throw std::invalid_argument("unpack_exogenous: length mismatch");
  return ExogenousStep{gamma_l[0], gamma_l[1], gamma_l[2], gamma_l[3], gamma_l[4]};
}

MldSystem build_mld(const MicrogridParams& p) {
  validate_params(p);
  const int g = p.n_gen;
  MldSystem s;
  s.dims.n_c = 1;
  s.dims.n_d = 0;
  s.dims.m_c = 2 + g;  // P_b, P_grid, P_dis_1..g
  s.dims.m_d = g;      // delta_dis_1..g
  s.dims.r_c = 2;      // z_b, z_grid
  s.dims.r_d = 2;      // delta_b, delta_grid

  const double a_z = p.t_s * (p.eta_c - 1.0 / p.eta_d);
  const double b_p = p.t_s / p.eta_d;

  const int m = s.dims.m();
  s.A = Matrix::Identity(1, 1);
  s.B1 = Matrix::Zero(1, m);
  s.B1(0, 0) = b_p;  // P_b
  s.B2 = Matrix::Zero(1, 2);
  s.B3 = Matrix::Zero(1, 2);
  s.B3(0, 0) = a_z;  // z_b
  s.B5 = Vector::Zero(1);

  const double m_b = std::max(std::abs(p.p_b_min), p.p_b_max);
  const double m_g = std::max(std::abs(p.p_grid_min), p.p_grid_max);

  const int q = 22 + 2 * g;
  s.E1 = Matrix::Zero(q, m);
  s.E2 = Matrix::Zero(q, 2);
  s.E3 = Matrix::Zero(q, 2);
  s.E4 = Matrix::Zero(q, 1);
  s.E5 = Vector::Zero(q);

  // input column indices
  const int i_pb = 0, i_pgrid = 1;
  const auto i_pdis = [&](int j) { return 2 + j; };
  const auto i_ddis = [&](int j) { return 2 + g + j; };
  // auxiliary indices
  const int i_db = 0, i_dgrid = 1;  // delta
  const int i_zb = 0, i_zgrid = 1;  // z

  int r = 0;
  const auto sign_pair = [&](int delta_idx, int power_idx, double big_m) {
    // delta = 1  =>  P >= 0
    s.E2(r, delta_idx) = big_m;
    s.E1(r, power_idx) = 1.0;
    s.E5[r] = big_m;
    ++r;
    // delta = 0  =>  P <= -kSignOffset
    s.E2(r, delta_idx) = -(big_m + kSignOffset);
    s.E1(r, power_idx) = -1.0;
    s.E5[r] = -kSignOffset;
    ++r;
  };
  sign_pair(i_db, i_pb, m_b);
  sign_pair(i_dgrid, i_pgrid, m_g);

  // Together with the sign indicator (delta = 1 iff P >= 0) the product
  // z = delta*P pins z to max(P, 0) at every feasible point, so the lower
  // envelope can be written exactly; this keeps the LP relaxation bounds
  // usable for branch-and-bound without cutting planes.
  const auto product_quad = [&](int z_idx, int delta_idx, int power_idx,
                                double big_m) {
    // z >= 0
    s.E3(r, z_idx) = -1.0;
    ++r;
    // z >= P
    s.E3(r, z_idx) = -1.0;
    s.E1(r, power_idx) = -1.0;
    ++r;
    // z <= M*delta
    s.E3(r, z_idx) = 1.0;
    s.E2(r, delta_idx) = -big_m;
    ++r;
    // z <= P + M*(1 - delta)
    s.E3(r, z_idx) = 1.0;
    s.E2(r, delta_idx) = big_m;
    s.E1(r, power_idx) = 1.0;
    s.E5[r] = big_m;
    ++r;
  };
  product_quad(i_zb, i_db, i_pb, m_b);
  product_quad(i_zgrid, i_dgrid, i_pgrid, m_g);

  // power balance: P_b = sum_j P_dis_j + P_res + P_grid - P_load, as two
  // opposing inequalities; P_res - P_load arrives through the per-step rhs
  s.E1(r, i_pb) = -1.0;
  s.E1(r, i_pgrid) = 1.0;
  for (int j = 0; j < g; ++j) s.E1(r, i_pdis(j)) = 1.0;
  ++r;
  s.E1(r, i_pb) = 1.0;
  s.E1(r, i_pgrid) = -1.0;
  for (int j = 0; j < g; ++j) s.E1(r, i_pdis(j)) = -1.0;
  ++r;

  // P_b and P_grid bounds
  s.E1(r, i_pb) = -1.0;
  s.E5[r] = p.p_b_max;
  ++r;
  s.E1(r, i_pb) = 1.0;
  s.E5[r] = -p.p_b_min;
  ++r;
  s.E1(r, i_pgrid) = -1.0;
  s.E5[r] = p.p_grid_max;
  ++r;
  s.E1(r, i_pgrid) = 1.0;
  s.E5[r] = -p.p_grid_min;
  ++r;

  // gated generator bounds: delta_j*P_min <= P_j <= delta_j*P_max
  for (int j = 0; j < g; ++j) {
    s.E1(r, i_pdis(j)) = -1.0;
    s.E1(r, i_ddis(j)) = p.p_dis_max;
    ++r;
    s.E1(r, i_pdis(j)) = 1.0;
    s.E1(r, i_ddis(j)) = -p.p_dis_min;
    ++r;
  }

  // storage level bounds on the current state
  s.E4(r, 0) = -1.0;
  s.E5[r] = p.x_b_max;
  ++r;
  s.E4(r, 0) = 1.0;
  s.E5[r] = -p.x_b_min;
  ++r;
  // and on the successor state, via the dynamics
  s.E3(r, i_zb) = a_z;
  s.E1(r, i_pb) = -b_p;
  s.E4(r, 0) = -1.0;
  s.E5[r] = p.x_b_max;
  ++r;
  s.E3(r, i_zb) = -a_z;
  s.E1(r, i_pb) = b_p;
  s.E4(r, 0) = 1.0;
  s.E5[r] = -p.x_b_min;
  ++r;

  return s;
}

Vector stage_cost_coefficients(const MicrogridParams& p, const ExogenousStep& e) {
  Vector c = Vector::Zero(2 + p.n_gen + 2);
  c[1] = e.c_sell;  // P_grid
  for (int j = 0; j < p.n_gen; ++j) c[2 + j] = e.c_prod;
  c[2 + p.n_gen + 1] = e.c_buy - e.c_sell;  // z_grid
  return c;
}

MpcProblem build_mpc_problem(const MicrogridParams& p, int n_p) {
  if (n_p < 1) throw std::invalid_argument("build_mpc_problem: n_p must be >= 1");
  MpcProblem out;
  out.system = build_mld(p);
  out.layout.n_p = n_p;
  out.layout.dims = out.system.dims;
  out.layout.gamma_per_step = kGammaPerStep;
  out.layout.state_names = {"x_b"};
  out.layout.cont_names = {"P_b", "P_grid"};
  for (int j = 0; j < p.n_gen; ++j)
    out.layout.cont_names.push_back("P_dis_" + std::to_string(j + 1));
  out.layout.cont_names.push_back("z_b");
  out.layout.cont_names.push_back("z_grid");
  for (int j = 0; j < p.n_gen; ++j)
    out.layout.disc_names.push_back("delta_dis_" + std::to_string(j + 1));
  out.layout.disc_names.push_back("delta_b");
  out.layout.disc_names.push_back("delta_grid");

  const int dps = out.layout.disc_per_step();
  const Index q = out.system.rows();
  const MicrogridParams params = p;
  out.stage_cost = [params, dps](const Vector& gamma_l) {
    Vector slice(2 + params.n_gen + 2 + dps);
    slice << stage_cost_coefficients(params, unpack_exogenous(gamma_l)),
        Vector::Zero(dps);
    return slice;
  };
  out.stage_rhs = [q](const Vector& gamma_l) {
    const ExogenousStep e = unpack_exogenous(gamma_l);
    Vector w = Vector::Zero(q);
    w[kBalanceRowUpper] = e.p_res - e.p_load;
    w[kBalanceRowLower] = -(e.p_res - e.p_load);
    return w;
  };
  return out;
}

int sub_action_count(const MicrogridParams& p) { return 1 << (p.n_gen + 2); }

Vector sub_action_from_index(int index, int bits) {
  if (index < 0 || index >= (1 << bits))
    throw std::invalid_argument("sub_action_from_index: index out of range");
  Vector v(bits);
  for (int j = 0; j < bits; ++j) v[j] = (index >> (bits - 1 - j)) & 1 ? 1.0 : 0.0;
  return v;
}

int sub_action_to_index(const Vector& bits_vec) {
  int index = 0;
  const int bits = static_cast<int>(bits_vec.size());
  for (int j = 0; j < bits; ++j) {
    const double b = bits_vec[j];
    if (b != 0.0 && b != 1.0)
      throw std::invalid_argument("sub_action_to_index: entries must be 0 or 1");
    index |= (b == 1.0 ? 1 : 0) << (bits - 1 - j);
  }
  return index;
}

std::vector<Vector> sub_action_space(const MicrogridParams& p) {
  const int bits = p.n_gen + 2;
  std::vector<Vector> table;
  table.reserve(static_cast<size_t>(1) << bits);
  for (int i = 0; i < (1 << bits); ++i) table.push_back(sub_action_from_index(i, bits));
  return table;
}

namespace {
using nlohmann::json;
}

std::string params_to_json(const MicrogridParams& p) {
  json j;
  j["x_b_max"] = p.x_b_max;
  j["x_b_min"] = p.x_b_min;
  j["P_grid_max"] = p.p_grid_max;
  j["P_grid_min"] = p.p_grid_min;
  j["P_b_max"] = p.p_b_max;
  j["P_b_min"] = p.p_b_min;
  j["P_dis_max"] = p.p_dis_max;
  j["P_dis_min"] = p.p_dis_min;
  j["eta_c"] = p.eta_c;
  j["eta_d"] = p.eta_d;
  j["N_gen"] = p.n_gen;
  j["T_s"] = p.t_s;
  return j.dump(2);
}

MicrogridParams params_from_json(const std::string& text) {
  const json j = json::parse(text);
  MicrogridParams p;
  for (const auto& [key, value] : j.items()) {
    if (key == "x_b_max") p.x_b_max = value.get<double>();
    else if (key == "x_b_min") p.x_b_min = value.get<double>();
    else if (key == "P_grid_max") p.p_grid_max = value.get<double>();
    else if (key == "P_grid_min") p.p_grid_min = value.get<double>();
    else if (key == "P_b_max") p.p_b_max = value.get<double>();
    else if (key == "P_b_min") p.p_b_min = value.get<double>();
    else if (key == "P_dis_max") p.p_dis_max = value.get<double>();
    else if (key == "P_dis_min") p.p_dis_min = value.get<double>();
    else if (key == "eta_c") p.eta_c = value.get<double>();
    else if (key == "eta_d") p.eta_d = value.get<double>();
    else if (key == "N_gen") p.n_gen = value.get<int>();
    else if (key == "T_s") p.t_s = value.get<double>();
    else throw std::runtime_error("unknown microgrid parameter: " + key);
  }
  validate_params(p);
  return p;
}

void save_params(const MicrogridParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << params_to_json(p) << "\n";
}

MicrogridParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return params_from_json(buf.str());
}

}  // namespace rlmpc::microgrid
