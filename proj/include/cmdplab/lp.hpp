#pragma once

/*
 * Self-contained dense two-phase simplex method for equality-form linear
 * programs:  maximize c'x  subject to  A x = b, x >= 0.
 *
 * Designed for desk-scale problems (tens of variables): a full tableau is
 * kept and Bland's anti-cycling rule (always the lowest-index eligible
 * entering/leaving variable) makes the pivot sequence deterministic and
 * finite even under the heavy degeneracy of Bellman flow polytopes.
 */

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cmdplab {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpOutcome {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;
  double objective = 0.0;
};

namespace detail {

/* One simplex phase on an existing basic feasible tableau.
 * tab is m x (n_total+1) with the RHS in the last column; basis[i] is the
 * variable basic in row i.  allowed[j] marks columns eligible to enter.
 * Maximizes obj (size n_total).  Returns false if unbounded. */
inline bool simplex_phase(Eigen::MatrixXd& tab, std::vector<int>& basis,
                          const std::vector<double>& obj, const std::vector<char>& allowed) {
  const int m = static_cast<int>(tab.rows());
  const int n_total = static_cast<int>(tab.cols()) - 1;
  const double tol = 1e-9;

  for (;;) {
    /* Reduced costs: r_j = obj_j - sum_i obj_basis[i] * tab(i,j). */
    int enter = -1;
    for (int j = 0; j < n_total && enter < 0; ++j) {
      if (!allowed[j]) continue;
      double r = obj[j];
      for (int i = 0; i < m; ++i) r -= obj[basis[i]] * tab(i, j);
      if (r > tol) enter = j; /* Bland: first eligible index */
    }
    if (enter < 0) return true; /* optimal */

    /* Ratio test; Bland tie-break on the basic variable's index. */
    int leave = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < m; ++i) {
      if (tab(i, enter) > tol) {
        const double ratio = tab(i, n_total) / tab(i, enter);
        if (leave < 0 || ratio < best_ratio - 1e-12 ||
            (std::abs(ratio - best_ratio) <= 1e-12 && basis[i] < basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) return false; /* unbounded direction */

    /* Pivot. */
    tab.row(leave) /= tab(leave, enter);
    for (int i = 0; i < m; ++i) {
      if (i == leave) continue;
      const double f = tab(i, enter);
      if (f != 0.0) tab.row(i) -= f * tab.row(leave);
    }
    basis[leave] = enter;
  }
}

}  // namespace detail

/*
 * Two-phase simplex.  Rows with negative RHS are negated up front; phase 1
 * minimizes the sum of artificial variables from the all-artificial basis,
 * then artificials are driven out (or their rows found redundant) before
 * phase 2 optimizes the real objective with artificial columns barred.
 */
inline LpOutcome simplex_solve(Eigen::MatrixXd a, Eigen::VectorXd b, const Eigen::VectorXd& c) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  if (b.size() != m || c.size() != n) throw std::invalid_argument("simplex_solve: shape mismatch");

  for (int i = 0; i < m; ++i) {
    if (b(i) < 0.0) {
      a.row(i) *= -1.0;
      b(i) = -b(i);
    }
  }

  const int n_total = n + m; /* real + artificial */
  Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m, n_total + 1);
  tab.block(0, 0, m, n) = a;
  tab.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
  tab.col(n_total) = b;

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;

  /* Phase 1: maximize -(sum of artificials). */
  std::vector<double> obj1(n_total, 0.0);
  for (int j = n; j < n_total; ++j) obj1[j] = -1.0;
  std::vector<char> allow_all(n_total, 1);
  if (!detail::simplex_phase(tab, basis, obj1, allow_all))
    throw std::logic_error("simplex_solve: phase 1 unbounded (impossible)");

  double artificial_mass = 0.0;
  for (int i = 0; i < m; ++i)
    if (basis[i] >= n) artificial_mass += tab(i, n_total);
  if (artificial_mass > 1e-8) {
    LpOutcome out;
    out.status = LpStatus::infeasible;
    return out;
  }

  /* Drive remaining zero-level artificials out of the basis when possible. */
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) continue;
    int pivot_col = -1;
    for (int j = 0; j < n; ++j) {
      if (std::abs(tab(i, j)) > 1e-9) {
        pivot_col = j;
        break;
      }
    }
    if (pivot_col < 0) continue; /* redundant row; artificial stays basic at value 0 */
    tab.row(i) /= tab(i, pivot_col);
    for (int k = 0; k < m; ++k) {
      if (k == i) continue;
      const double f = tab(k, pivot_col);
      if (f != 0.0) tab.row(k) -= f * tab.row(i);
    }
    basis[i] = pivot_col;
  }

  /* Phase 2: real objective, artificial columns barred from entering. */
  std::vector<double> obj2(n_total, 0.0);
  for (int j = 0; j < n; ++j) obj2[j] = c(j);
  std::vector<char> allow_real(n_total, 0);
  for (int j = 0; j < n; ++j) allow_real[j] = 1;
  if (!detail::simplex_phase(tab, basis, obj2, allow_real)) {
    LpOutcome out;
    out.status = LpStatus::unbounded;
    return out;
  }

  LpOutcome out;
  out.status = LpStatus::optimal;
  out.x.assign(n, 0.0);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) out.x[basis[i]] = tab(i, n_total);
  out.objective = 0.0;
  for (int j = 0; j < n; ++j) out.objective += c(j) * out.x[j];
  return out;
}

}  // namespace cmdplab
