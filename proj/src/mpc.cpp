#include "rlmpc/mpc.hpp"

#include <chrono>
#include <fstream>
#include <stdexcept>

namespace rlmpc {

MldStep to_mld_step(const StepDecision& d) {
  MldStep s;
  s.u.resize(d.u_c.size() + d.u_d.size());
  s.u << d.u_c, d.u_d;
  s.delta = d.delta;
  s.z = d.z;
  return s;
}

Vector HorizonLayout::pack(const std::vector<StepDecision>& steps) const {
  if (static_cast<int>(steps.size()) != n_p)
    throw std::invalid_argument("pack: wrong number of steps");
  Vector eps(num_vars());
  for (int l = 0; l < n_p; ++l) {
    const StepDecision& d = steps[static_cast<size_t>(l)];
    if (d.u_c.size() != dims.m_c || d.z.size() != dims.r_c ||
        d.u_d.size() != dims.m_d || d.delta.size() != dims.r_d)
      throw std::invalid_argument("pack: slice size mismatch");
    eps.segment(cont_index(l, 0), dims.m_c) = d.u_c;
    eps.segment(cont_index(l, dims.m_c), dims.r_c) = d.z;
    eps.segment(disc_index(l, 0), dims.m_d) = d.u_d;
    eps.segment(disc_index(l, dims.m_d), dims.r_d) = d.delta;
  }
  return eps;
}

std::vector<StepDecision> HorizonLayout::unpack(const Vector& eps) const {
  if (eps.size() != num_vars())
    throw std::invalid_argument("unpack: length mismatch");
  std::vector<StepDecision> steps(static_cast<size_t>(n_p));
  for (int l = 0; l < n_p; ++l) {
    StepDecision& d = steps[static_cast<size_t>(l)];
    d.u_c = eps.segment(cont_index(l, 0), dims.m_c);
    d.z = eps.segment(cont_index(l, dims.m_c), dims.r_c);
    d.u_d = eps.segment(disc_index(l, 0), dims.m_d);
    d.delta = eps.segment(disc_index(l, dims.m_d), dims.r_d);
  }
  return steps;
}

namespace {

void check_problem(const MpcProblem& p, const AugmentedState& chi) {
  const ValidationReport r = validate(p.system);
  if (!r.ok())
    throw std::invalid_argument("build_milp: invalid system: " + r.to_string());
  if (p.layout.n_p < 1) throw std::invalid_argument("build_milp: n_p must be >= 1");
  if (chi.x.size() != p.system.dims.n())
    throw std::invalid_argument("build_milp: state length mismatch");
  if (chi.gamma.size() != p.layout.gamma_len())
    throw std::invalid_argument("build_milp: gamma length mismatch");
}

}  // namespace

CompactMilp build_milp(const MpcProblem& p, const AugmentedState& chi) {
  check_problem(p, chi);
  const MldSystem& sys = p.system;
  const HorizonLayout& lay = p.layout;
  const MldDims& d = sys.dims;
  const int n_p = lay.n_p;
  const Index n = d.n();
  const Index q = sys.rows();
  const Index nc = lay.num_cont();
  const Index nd = lay.num_disc();
  const Index nv = nc + nd;

  // split input matrices into continuous / discrete column groups
  const Matrix b1c = sys.B1.leftCols(d.m_c);
  const Matrix b1d = sys.B1.rightCols(d.m_d);
  const Matrix e1c = sys.E1.leftCols(d.m_c);
  const Matrix e1d = sys.E1.rightCols(d.m_d);

  std::vector<Matrix> a_pow(static_cast<size_t>(n_p) + 1);
  a_pow[0] = Matrix::Identity(n, n);
  for (int i = 1; i <= n_p; ++i) a_pow[static_cast<size_t>(i)] = a_pow[static_cast<size_t>(i - 1)] * sys.A;
  std::vector<Matrix> a_pow_sum(static_cast<size_t>(n_p) + 1);  // sum_{i<l} A^i
  a_pow_sum[0] = Matrix::Zero(n, n);
  for (int i = 1; i <= n_p; ++i)
    a_pow_sum[static_cast<size_t>(i)] = a_pow_sum[static_cast<size_t>(i - 1)] + a_pow[static_cast<size_t>(i - 1)];

  CompactMilp out;
  out.lp.G = Matrix::Zero(static_cast<Index>(n_p) * q, nv);
  out.lp.h = Vector::Zero(out.lp.G.rows());
  out.lp.c = Vector::Zero(nv);

  for (int l = 0; l < n_p; ++l) {
    const Index row0 = static_cast<Index>(l) * q;
    auto block = [&](Index col0, Index cols) {
      return out.lp.G.block(row0, col0, q, cols);
    };
    if (d.m_c > 0) block(lay.cont_index(l, 0), d.m_c) = -e1c;
    if (d.r_c > 0) block(lay.cont_index(l, d.m_c), d.r_c) = sys.E3;
    if (d.m_d > 0) block(lay.disc_index(l, 0), d.m_d) = -e1d;
    if (d.r_d > 0) block(lay.disc_index(l, d.m_d), d.r_d) = sys.E2;

    for (int j = 0; j < l; ++j) {
      const Matrix w = sys.E4 * a_pow[static_cast<size_t>(l - 1 - j)];
      if (d.m_c > 0) block(lay.cont_index(j, 0), d.m_c) -= w * b1c;
      if (d.r_c > 0) block(lay.cont_index(j, d.m_c), d.r_c) -= w * sys.B3;
      if (d.m_d > 0) block(lay.disc_index(j, 0), d.m_d) -= w * b1d;
      if (d.r_d > 0) block(lay.disc_index(j, d.m_d), d.r_d) -= w * sys.B2;
    }

    const Vector gamma_l = lay.gamma_step(chi.gamma, l);
    Vector h_l = sys.E5 + sys.E4 * (a_pow[static_cast<size_t>(l)] * chi.x) +
                 sys.E4 * (a_pow_sum[static_cast<size_t>(l)] * sys.B5);
    if (p.stage_rhs) {
      const Vector w_l = p.stage_rhs(gamma_l);
      if (w_l.size() != q)
        throw std::invalid_argument("build_milp: stage_rhs length mismatch");
      h_l += w_l;
    }
    out.lp.h.segment(row0, q) = h_l;

    if (p.stage_cost) {
      const Vector slice = p.stage_cost(gamma_l);
      if (slice.size() != lay.cont_per_step() + lay.disc_per_step())
        throw std::invalid_argument("build_milp: stage_cost length mismatch");
      out.lp.c.segment(lay.cont_index(l, 0), lay.cont_per_step()) +=
          slice.head(lay.cont_per_step());
      out.lp.c.segment(lay.disc_index(l, 0), lay.disc_per_step()) +=
          slice.tail(lay.disc_per_step());
    }
  }

  if (p.terminal_cost.size() > 0) {
    if (p.terminal_cost.size() != n)
      throw std::invalid_argument("build_milp: terminal_cost length mismatch");
    // variable part of v' x(k+N_p) after substitution; the x(k)-dependent
    // constant does not affect the argmin and is omitted
    for (int j = 0; j < n_p; ++j) {
      const Vector vA = a_pow[static_cast<size_t>(n_p - 1 - j)].transpose() * p.terminal_cost;
      if (d.m_c > 0)
        out.lp.c.segment(lay.cont_index(j, 0), d.m_c) += b1c.transpose() * vA;
      if (d.r_c > 0)
        out.lp.c.segment(lay.cont_index(j, d.m_c), d.r_c) += sys.B3.transpose() * vA;
      if (d.m_d > 0)
        out.lp.c.segment(lay.disc_index(j, 0), d.m_d) += b1d.transpose() * vA;
      if (d.r_d > 0)
        out.lp.c.segment(lay.disc_index(j, d.m_d), d.r_d) += sys.B2.transpose() * vA;
    }
  }

  // [0,1] bounds for every discrete coordinate; the LP layer folds these
  // into rows when solving
  out.lp.lo = Vector::Constant(nv, -kInf);
  out.lp.hi = Vector::Constant(nv, kInf);
  out.binary_indices.reserve(static_cast<size_t>(nd));
  for (Index t = 0; t < nd; ++t) {
    const Index col = nc + t;
    out.lp.lo[col] = 0.0;
    out.lp.hi[col] = 1.0;
    out.binary_indices.push_back(col);
  }
  return out;
}

FixedLp fix_discrete(const MpcProblem& p, const AugmentedState& chi,
                     const Vector& eps_d) {
  if (eps_d.size() != p.layout.num_disc())
    throw std::invalid_argument("fix_discrete: eps_d length mismatch");
  return fix_binaries(build_milp(p, chi), eps_d);
}

StepDecision extract_first_input(const Vector& primal, const HorizonLayout& layout) {
  if (primal.size() != layout.num_vars())
    throw std::invalid_argument("extract_first_input: length mismatch");
  StepDecision d;
  d.u_c = primal.segment(layout.cont_index(0, 0), layout.dims.m_c);
  d.z = primal.segment(layout.cont_index(0, layout.dims.m_c), layout.dims.r_c);
  d.u_d = primal.segment(layout.disc_index(0, 0), layout.dims.m_d);
  d.delta = primal.segment(layout.disc_index(0, layout.dims.m_d), layout.dims.r_d);
  return d;
}

Matrix implied_states(const MpcProblem& p, const Vector& x0, const Vector& eps) {
  const HorizonLayout& lay = p.layout;
  const std::vector<StepDecision> steps = lay.unpack(eps);
  const MldDims& d = p.system.dims;
  Matrix states(lay.n_p + 1, d.n());
  Vector x = x0;
  states.row(0) = x.transpose();
  for (int l = 0; l < lay.n_p; ++l) {
    const StepDecision& s = steps[static_cast<size_t>(l)];
    Vector next = p.system.A * x + p.system.B5;
    if (d.m_c > 0) next += p.system.B1.leftCols(d.m_c) * s.u_c;
    if (d.m_d > 0) next += p.system.B1.rightCols(d.m_d) * s.u_d;
    if (d.r_d > 0) next += p.system.B2 * s.delta;
    if (d.r_c > 0) next += p.system.B3 * s.z;
    x = next;
    states.row(l + 1) = x.transpose();
  }
  return states;
}

RhResult receding_horizon_run(const MpcProblem& p, const Vector& x0, int start_k,
                              int steps, const GammaWindow& window,
                              const DiscretePolicy& policy, const BnbConfig& bnb) {
  RhResult result;
  result.steps.reserve(static_cast<size_t>(steps));
  Vector x = x0;

  for (int i = 0; i < steps; ++i) {
    const int k = start_k + i;
    RhRecord rec;
    rec.k = k;
    rec.chi = AugmentedState{x, window(k)};

    const auto t0 = std::chrono::steady_clock::now();
    const CompactMilp milp = build_milp(p, rec.chi);

    bool solved = false;
    if (policy) {
      const Vector eps_d = policy(rec.chi);
      const FixedLp fixed = fix_binaries(milp, eps_d);
      const LpSolution lp_sol = solve_lp(fixed.lp);
      if (lp_sol.status == LpStatus::Optimal) {
        rec.epsilon = assemble_full_primal(milp, fixed, lp_sol.primal, eps_d);
        rec.status = "optimal";
        solved = true;
      } else {
        rec.fallback_used = true;
        ++result.fallback_count;
        const MilpSolution exact = solve_milp(milp, bnb);
        if (exact.status == MilpStatus::Optimal) {
          rec.epsilon = exact.primal;
          rec.status = lp_sol.status == LpStatus::Infeasible
                           ? "infeasible_fallback"
                           : "iterationlimit_fallback";
          solved = true;
        }
      }
    } else {
      const MilpSolution exact = solve_milp(milp, bnb);
      if (exact.status == MilpStatus::Optimal) {
        rec.epsilon = exact.primal;
        rec.status = "optimal";
        solved = true;
      }
    }
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!solved) {
      // no feasible input exists even for the exact solver: record the
      // event, hold the state, and keep the run alive
      rec.status = "infeasible_exact";
      rec.epsilon = Vector::Zero(p.layout.num_vars());
      rec.first = extract_first_input(rec.epsilon, p.layout);
      result.steps.push_back(std::move(rec));
      continue;
    }

    rec.first = extract_first_input(rec.epsilon, p.layout);
    if (p.stage_cost) {
      const Vector gamma_0 = p.layout.gamma_step(rec.chi.gamma, 0);
      const Vector slice = p.stage_cost(gamma_0);
      Vector first_full(p.layout.cont_per_step() + p.layout.disc_per_step());
      first_full << rec.first.u_c, rec.first.z, rec.first.u_d, rec.first.delta;
      rec.stage_cost = slice.dot(first_full);
    }
    result.total_stage_cost += rec.stage_cost;
    x = step(p.system, x, to_mld_step(rec.first));
    result.steps.push_back(std::move(rec));
  }
  result.final_state = x;
  return result;
}

void write_trajectory_csv(const RhResult& result, const HorizonLayout& layout,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "k";
  for (int i = 0; i < layout.dims.n(); ++i) {
    const std::string name =
        i < static_cast<int>(layout.state_names.size())
            ? layout.state_names[static_cast<size_t>(i)]
            : "x" + std::to_string(i);
    out << "," << name;
  }
  for (const auto& n : layout.cont_names) out << "," << n;
  for (const auto& n : layout.disc_names) out << "," << n;
  out << ",stage_cost,status,wall_time_s\n";
  out.precision(12);
  for (const auto& rec : result.steps) {
    out << rec.k;
    for (Index i = 0; i < rec.chi.x.size(); ++i) out << "," << rec.chi.x[i];
    for (Index i = 0; i < rec.first.u_c.size(); ++i) out << "," << rec.first.u_c[i];
    for (Index i = 0; i < rec.first.z.size(); ++i) out << "," << rec.first.z[i];
    for (Index i = 0; i < rec.first.u_d.size(); ++i) out << "," << rec.first.u_d[i];
    for (Index i = 0; i < rec.first.delta.size(); ++i) out << "," << rec.first.delta[i];
    out << "," << rec.stage_cost << "," << rec.status << "," << rec.wall_time_s
        << "\n";
  }
}

}  // namespace rlmpc
