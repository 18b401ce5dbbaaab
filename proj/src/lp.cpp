#include "rlmpc/lp.hpp"

#include <stdexcept>
#include <vector>

namespace rlmpc {

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kDegenerateStep = 1e-12;

// Dense simplex tableau over the standard form
//   min c'y  s.t.  M y = b, y >= 0.
// Variables with a finite lower bound are shifted to zero; free variables
// are split into a difference of nonnegative pairs. Finite upper bounds
// become extra inequality rows, one slack per row; rows with negative rhs
// are negated and given an artificial.
struct Tableau {
  Matrix body;            // m x (n_cols + 1); last column is the rhs
  Eigen::RowVectorXd z1;  // phase-1 reduced-cost row, last entry -objective
  Eigen::RowVectorXd z2;  // phase-2 reduced-cost row, last entry -objective
  std::vector<Index> basis;
  Index n_real = 0;  // structural + slack columns; artificials follow
  Index n_cols = 0;

  Index rhs_col() const { return n_cols; }

  void pivot(Index row, Index col) {
    const double piv = body(row, col);
    body.row(row) /= piv;
    Eigen::RowVectorXd prow = body.row(row);
    Vector colv = body.col(col);
    colv(row) = 0.0;
    body.noalias() -= colv * prow;
    body.row(row) = prow;
    // exact zeros in the pivot column keep later ratio tests clean
    body.col(col).setZero();
    body(row, col) = 1.0;
    z1 -= z1(col) * prow;
    z2 -= z2(col) * prow;
    z1(col) = 0.0;
    z2(col) = 0.0;
    basis[static_cast<size_t>(row)] = col;
  }
};

// Entering-column choice. In phase 2 artificial columns are barred.
Index choose_entering(const Eigen::RowVectorXd& z, Index limit, bool bland) {
  Index best = -1;
  double best_val = -kLpOptTol;
  for (Index j = 0; j < limit; ++j) {
    const double rc = z(j);
    if (rc < best_val) {
      if (bland) return j;
      best_val = rc;
      best = j;
    }
  }
  return best;
}

// Ratio test; ties go to the row whose basic variable has the lowest
// column index, which together with Bland entering prevents cycling.
Index choose_leaving(const Tableau& t, Index col) {
  Index best_row = -1;
  double best_ratio = kInf;
  Index best_basic = -1;
  for (Index r = 0; r < t.body.rows(); ++r) {
    const double a = t.body(r, col);
    if (a <= kPivotTol) continue;
    const double ratio = t.body(r, t.rhs_col()) / a;
    const Index basic = t.basis[static_cast<size_t>(r)];
    if (ratio < best_ratio - 1e-12 ||
        (ratio <= best_ratio + 1e-12 && (best_row < 0 || basic < best_basic))) {
      if (ratio < best_ratio) best_ratio = ratio;
      best_row = r;
      best_basic = basic;
    }
  }
  return best_row;
}

enum class PhaseOutcome { Done, Unbounded, IterationLimit };

PhaseOutcome run_phase(Tableau& t, bool phase_one, long max_iterations,
                       int& iterations) {
  Eigen::RowVectorXd& z = phase_one ? t.z1 : t.z2;
  const Index limit = phase_one ? t.n_cols : t.n_real;
  int degenerate_streak = 0;
  bool bland = false;
  while (true) {
    const Index col = choose_entering(z, limit, bland);
    if (col < 0) return PhaseOutcome::Done;
    const Index row = choose_leaving(t, col);
    if (row < 0) return PhaseOutcome::Unbounded;
    const double step = t.body(row, t.rhs_col()) / t.body(row, col);
    if (step <= kDegenerateStep) {
      if (++degenerate_streak >= kBlandStallThreshold) bland = true;
    } else {
      degenerate_streak = 0;
    }
    t.pivot(row, col);
    if (++iterations >= max_iterations) return PhaseOutcome::IterationLimit;
  }
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  const long default_cap =
      2000 + 50 * (lp.num_rows() + 2 * lp.num_vars() +
                   (lp.lo.size() > 0 ? lp.num_vars() : 0) +
                   (lp.hi.size() > 0 ? lp.num_vars() : 0));
  return solve_lp(lp, default_cap);
}

LpSolution solve_lp(const LinearProgram& lp, long max_iterations) {
  const Index p = lp.num_vars();
  const Index q0 = lp.num_rows();
  if (lp.G.rows() != q0 || lp.G.cols() != p)
    throw std::invalid_argument("solve_lp: G shape inconsistent with c/h");
  if (lp.lo.size() != 0 && lp.lo.size() != p)
    throw std::invalid_argument("solve_lp: lo length mismatch");
  if (lp.hi.size() != 0 && lp.hi.size() != p)
    throw std::invalid_argument("solve_lp: hi length mismatch");

  // Column plan: variable j maps to one nonnegative column (finite lower
  // bound, shifted) or a split pair (free). Finite upper bounds add rows.
  std::vector<double> shift(static_cast<size_t>(p), 0.0);
  std::vector<Index> col_of(static_cast<size_t>(p));   // first column of var j
  std::vector<bool> is_split(static_cast<size_t>(p));
  std::vector<std::pair<Index, double>> hi_rows;
  Index n_struct = 0;
  for (Index j = 0; j < p; ++j) {
    const double lo = lp.lo.size() ? lp.lo[j] : -kInf;
    const double hi = lp.hi.size() ? lp.hi[j] : kInf;
    col_of[static_cast<size_t>(j)] = n_struct;
    if (lo > -kInf) {
      shift[static_cast<size_t>(j)] = lo;
      is_split[static_cast<size_t>(j)] = false;
      n_struct += 1;
    } else {
      is_split[static_cast<size_t>(j)] = true;
      n_struct += 2;
    }
    if (hi < kInf) hi_rows.emplace_back(j, hi);
  }

  const Index q = q0 + static_cast<Index>(hi_rows.size());
  // rhs after shifting: h - G * shift, and hi - shift for bound rows
  Vector h(q);
  {
    Eigen::Map<const Vector> shift_v(shift.data(), p);
    h.head(q0) = lp.h - lp.G * shift_v;
  }
  for (Index r = 0; r < static_cast<Index>(hi_rows.size()); ++r) {
    const auto& [j, hi] = hi_rows[static_cast<size_t>(r)];
    h[q0 + r] = hi - shift[static_cast<size_t>(j)];
  }

  std::vector<Index> art_rows;
  for (Index i = 0; i < q; ++i)
    if (h[i] < 0) art_rows.push_back(i);
  const Index n_art = static_cast<Index>(art_rows.size());
  const Index n_real = n_struct + q;
  const Index n_cols = n_real + n_art;

  Tableau t;
  t.n_real = n_real;
  t.n_cols = n_cols;
  t.body.setZero(q, n_cols + 1);
  t.basis.assign(static_cast<size_t>(q), -1);

  const auto fill_row = [&](Index row, const auto& coeffs, double rhs, double sign) {
    for (Index j = 0; j < p; ++j) {
      const double a = coeffs(j);
      if (a == 0.0) continue;
      const Index c0 = col_of[static_cast<size_t>(j)];
      t.body(row, c0) = sign * a;
      if (is_split[static_cast<size_t>(j)]) t.body(row, c0 + 1) = -sign * a;
    }
    t.body(row, n_struct + row) = sign;  // slack
    t.body(row, n_cols) = sign * rhs;
  };

  for (Index i = 0; i < q0; ++i)
    fill_row(i, lp.G.row(i), h[i], h[i] < 0 ? -1.0 : 1.0);
  for (Index r = 0; r < static_cast<Index>(hi_rows.size()); ++r) {
    const Index i = q0 + r;
    const Index j = hi_rows[static_cast<size_t>(r)].first;
    const double sign = h[i] < 0 ? -1.0 : 1.0;
    const Index c0 = col_of[static_cast<size_t>(j)];
    t.body(i, c0) = sign;
    if (is_split[static_cast<size_t>(j)]) t.body(i, c0 + 1) = -sign;
    t.body(i, n_struct + i) = sign;
    t.body(i, n_cols) = sign * h[i];
  }

  for (Index a = 0; a < n_art; ++a) {
    const Index row = art_rows[static_cast<size_t>(a)];
    t.body(row, n_real + a) = 1.0;
    t.basis[static_cast<size_t>(row)] = n_real + a;
  }
  for (Index i = 0; i < q; ++i)
    if (t.basis[static_cast<size_t>(i)] < 0)
      t.basis[static_cast<size_t>(i)] = n_struct + i;

  // Phase-2 cost row over the structural columns.
  t.z2.setZero(n_cols + 1);
  for (Index j = 0; j < p; ++j) {
    const Index c0 = col_of[static_cast<size_t>(j)];
    t.z2(c0) = lp.c[j];
    if (is_split[static_cast<size_t>(j)]) t.z2(c0 + 1) = -lp.c[j];
  }

  // Phase-1 cost: sum of artificials, priced out over the initial basis.
  t.z1.setZero(n_cols + 1);
  for (Index a = 0; a < n_art; ++a) {
    const Index row = art_rows[static_cast<size_t>(a)];
    t.z1 -= t.body.row(row);
    t.z1(n_real + a) = 0.0;
  }

  LpSolution sol;
  sol.iterations = 0;

  if (n_art > 0) {
    const PhaseOutcome out = run_phase(t, true, max_iterations, sol.iterations);
    if (out == PhaseOutcome::IterationLimit) {
      sol.status = LpStatus::IterationLimit;
      return sol;
    }
    // Phase 1 minimizes a sum bounded below by zero; Unbounded cannot occur.
    const double infeas = -t.z1(n_cols);
    if (infeas > kFeasTol) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    // Drive any remaining artificials out of the basis. Rows where that is
    // impossible are redundant; squash their residual noise so later pivots
    // cannot move the frozen artificial off zero.
    for (Index row = 0; row < q; ++row) {
      if (t.basis[static_cast<size_t>(row)] < n_real) continue;
      bool pivoted = false;
      for (Index j = 0; j < n_real; ++j) {
        if (std::abs(t.body(row, j)) > kPivotTol) {
          t.pivot(row, j);
          ++sol.iterations;
          pivoted = true;
          break;
        }
      }
      if (!pivoted) {
        t.body.row(row).head(n_real).setZero();
        t.body(row, t.rhs_col()) = 0.0;
      }
    }
  }

  const PhaseOutcome out = run_phase(t, false, max_iterations, sol.iterations);
  if (out == PhaseOutcome::IterationLimit) {
    sol.status = LpStatus::IterationLimit;
    return sol;
  }
  if (out == PhaseOutcome::Unbounded) {
    sol.status = LpStatus::Unbounded;
    return sol;
  }

  Vector y = Vector::Zero(n_cols);
  for (Index i = 0; i < q; ++i)
    y[t.basis[static_cast<size_t>(i)]] = t.body(i, t.rhs_col());
  sol.primal.resize(p);
  for (Index j = 0; j < p; ++j) {
    const Index c0 = col_of[static_cast<size_t>(j)];
    sol.primal[j] = is_split[static_cast<size_t>(j)]
                        ? y[c0] - y[c0 + 1]
                        : y[c0] + shift[static_cast<size_t>(j)];
  }
  sol.objective = lp.c.dot(sol.primal);
  sol.status = LpStatus::Optimal;
  return sol;
}

}  // namespace rlmpc
