#pragma once

/*
 * Ground-truth reference machinery, independent of the iterative solvers:
 *  - Slater/feasibility certification via exact policy iteration on g;
 *  - the occupancy-measure linear program for (q*, pi*, V*);
 *  - a dual-function scan bracketing the optimal multiplier set;
 *  - a high-precision regularized-saddle reference (entropy + quadratic);
 *  - brute-force policy grid search for tiny instances.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/constants.hpp"
#include "cmdplab/geometry.hpp"
#include "cmdplab/lp.hpp"
#include "cmdplab/rng.hpp"

namespace cmdplab {

/* ------------------------------------------------------------------ */
/* Exact policy iteration on an arbitrary signal                       */
/* ------------------------------------------------------------------ */

struct PolicyIterationResult {
  TabularPolicy pi;       /* deterministic optimal policy */
  std::vector<double> v;  /* its exact value vector */
  double value_rho = 0.0;
};

/*
 * Greedy policy iteration with exact LU evaluation.  Ties in the greedy
 * argmax go to the lowest action index, which makes the returned
 * deterministic policy unique for given Q values.  Terminates finitely for
 * tabular MDPs; a value-improvement guard absorbs floating-point ties.
 */
inline PolicyIterationResult policy_iteration(const Cmdp& mdp, const std::vector<double>& signal) {
  const int S = mdp.n_states, A = mdp.n_actions;
  TabularPolicy pi = TabularPolicy::uniform(S, A);
  std::vector<double> v = evaluate_v(mdp, pi, signal);

  const int max_sweeps = 10000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const std::vector<double> q = evaluate_q(mdp, pi, signal);
    TabularPolicy greedy = pi;
    for (int s = 0; s < S; ++s) {
      int best = 0;
      for (int a = 1; a < A; ++a)
        if (q[mdp.sa(s, a)] > q[mdp.sa(s, best)]) best = a;
      for (int a = 0; a < A; ++a) greedy.prob(s, a) = (a == best) ? 1.0 : 0.0;
    }
    const std::vector<double> v_new = evaluate_v(mdp, greedy, signal);
    double improvement = -std::numeric_limits<double>::infinity();
    bool same = true;
    for (int s = 0; s < S; ++s) {
      improvement = std::max(improvement, v_new[s] - v[s]);
      for (int a = 0; a < A; ++a) same = same && (greedy.prob(s, a) == pi.prob(s, a));
    }
    const bool first_sweep = (sweep == 0); /* leaving the uniform start is not an improvement test */
    pi = greedy;
    v = v_new;
    if (same) break;
    if (!first_sweep && improvement <= 1e-13) break;
  }
  PolicyIterationResult out;
  out.pi = pi;
  out.v = v;
  out.value_rho = rho_dot(mdp, v);
  return out;
}

/* ------------------------------------------------------------------ */
/* Feasibility certificate                                             */
/* ------------------------------------------------------------------ */

struct FeasibilityCert {
  double xi = 0.0;          /* Slater slack: max_pi V_g^pi(rho) */
  TabularPolicy witness;    /* a maximizing policy */
  double lambda_max = 0.0;  /* 1/((1-gamma)xi); +inf when xi <= 0 */

  bool feasible() const { return xi >= 0.0; }
  bool strict() const { return xi > 0.0; }
};

inline FeasibilityCert certify_feasibility(const Cmdp& mdp) {
  const PolicyIterationResult best = policy_iteration(mdp, mdp.g_table());
  FeasibilityCert cert;
  cert.xi = best.value_rho;
  cert.witness = best.pi;
  cert.lambda_max = lambda_cap(mdp.gamma, cert.xi);
  return cert;
}

/* ------------------------------------------------------------------ */
/* Occupancy-measure linear program                                    */
/* ------------------------------------------------------------------ */

struct LpSolution {
  OccupancyMeasure q_star;
  TabularPolicy pi_star;  /* rows of q_star normalized; uniform on zero-mass states */
  double value = 0.0;     /* V_r^{pi*}(rho) */
  bool unique_flag = false;
};

struct InfeasibleError : std::runtime_error {
  FeasibilityCert cert;
  explicit InfeasibleError(FeasibilityCert c)
      : std::runtime_error("constrained problem infeasible: max_pi V_g^pi(rho) = " +
                           std::to_string(c.xi) + " < 0"),
        cert(std::move(c)) {}
};

namespace detail {

/* Flow polytope + constraint row as an equality-form LP over (q, slack). */
inline LpOutcome solve_occupancy_lp(const Cmdp& mdp, const std::vector<double>& objective) {
  const int S = mdp.n_states, A = mdp.n_actions;
  const int n_q = S * A;
  const int n = n_q + 1; /* + slack for <g,q> >= 0 */
  const int m = S + 1;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  /* Bellman flow: sum_a q(s',a) - gamma * sum_{s,a} P(s'|s,a) q(s,a) = rho(s'). */
  for (int s2 = 0; s2 < S; ++s2) {
    for (int a2 = 0; a2 < A; ++a2) a(s2, mdp.sa(s2, a2)) += 1.0;
    for (int s = 0; s < S; ++s)
      for (int a2 = 0; a2 < A; ++a2) a(s2, mdp.sa(s, a2)) -= mdp.gamma * mdp.p(s, a2, s2);
    b(s2) = mdp.init_dist[s2];
  }
  /* Constraint: <g,q> - slack = 0. */
  const std::vector<double> g = mdp.g_table();
  for (int i = 0; i < n_q; ++i) a(S, i) = g[i];
  a(S, n_q) = -1.0;
  b(S) = 0.0;

  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n_q; ++i) c(i) = objective[i];
  return simplex_solve(a, b, c);
}

}  // namespace detail

/*
 * Maximizes <r,q> over the flow polytope intersected with <g,q> >= 0, then
 * recovers the policy by row normalization.  Uniqueness is screened by two
 * re-solves with +/-1e-7 pseudo-random objective perturbations: a singleton
 * optimum is a stable vertex, so both perturbed optima coincide with it.
 */
inline LpSolution solve_lp(const Cmdp& mdp) {
  const int S = mdp.n_states, A = mdp.n_actions;
  const int n_q = S * A;

  const LpOutcome base = detail::solve_occupancy_lp(mdp, mdp.reward);
  if (base.status == LpStatus::infeasible) throw InfeasibleError(certify_feasibility(mdp));
  if (base.status != LpStatus::optimal)
    throw std::logic_error("solve_lp: unbounded occupancy LP (impossible on a compact polytope)");

  LpSolution sol;
  sol.q_star.n_states = S;
  sol.q_star.n_actions = A;
  sol.q_star.q.assign(base.x.begin(), base.x.begin() + n_q);
  sol.value = base.objective;

  sol.pi_star.n_states = S;
  sol.pi_star.n_actions = A;
  sol.pi_star.probs.resize(n_q);
  for (int s = 0; s < S; ++s) {
    const double mass = sol.q_star.state_mass(s);
    double row_sum = 0.0;
    for (int a = 0; a < A; ++a) {
      sol.pi_star.probs[mdp.sa(s, a)] =
          (mass > 1e-15) ? sol.q_star.at(s, a) / mass : 1.0 / static_cast<double>(A);
      row_sum += sol.pi_star.probs[mdp.sa(s, a)];
    }
    for (int a = 0; a < A; ++a) sol.pi_star.probs[mdp.sa(s, a)] /= row_sum;
  }

  /* Uniqueness screen via two perturbed re-solves (fixed pseudo-random direction). */
  Rng rng(0x9a7f3c21d4e56b08ULL);
  std::vector<double> h(n_q);
  for (int i = 0; i < n_q; ++i) h[i] = rng.uniform01();
  bool unique = true;
  for (const double sign : {+1.0, -1.0}) {
    std::vector<double> perturbed(mdp.reward);
    for (int i = 0; i < n_q; ++i) perturbed[i] += sign * 1e-7 * h[i];
    const LpOutcome alt = detail::solve_occupancy_lp(mdp, perturbed);
    if (alt.status != LpStatus::optimal) {
      unique = false;
      break;
    }
    for (int i = 0; i < n_q && unique; ++i)
      if (std::abs(alt.x[i] - sol.q_star.q[i]) > 1e-6) unique = false;
    if (!unique) break;
  }
  sol.unique_flag = unique;
  return sol;
}

/* ------------------------------------------------------------------ */
/* Dual-function scan                                                  */
/* ------------------------------------------------------------------ */

struct DualScanResult {
  double lo = 0.0;          /* bracket of width <= tol containing a minimizer */
  double hi = 0.0;
  double lambda_star = 0.0; /* bracket midpoint, the reported representative */
  double value = 0.0;       /* V_D(lambda_star) */
};

/*
 * Minimizes the convex piecewise-linear dual V_D(lambda) = max_pi
 * V_{r+lambda*g}^pi(rho) over [0, lambda_max]: a 33-point grid locates the
 * minimizing cell, then golden-section refinement shrinks the bracket to
 * width <= tol.  Each evaluation is one exact policy-iteration solve.
 */
inline DualScanResult dual_scan(const Cmdp& mdp, const FeasibilityCert& cert, double tol) {
  if (!cert.strict())
    throw std::invalid_argument("dual_scan: requires strict feasibility (xi > 0)");
  if (!(tol > 0.0)) throw std::invalid_argument("dual_scan: tol must be positive");

  const auto dual_value = [&mdp](double lambda) {
    return policy_iteration(mdp, lagrangian_signal(mdp, lambda)).value_rho;
  };

  const int grid_points = 33;
  const double lam_max = cert.lambda_max;
  int best_idx = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    const double lam = lam_max * static_cast<double>(i) / (grid_points - 1);
    const double val = dual_value(lam);
    if (val < best_val) {
      best_val = val;
      best_idx = i;
    }
  }
  double lo = lam_max * static_cast<double>(std::max(0, best_idx - 1)) / (grid_points - 1);
  double hi = lam_max * static_cast<double>(std::min(grid_points - 1, best_idx + 1)) /
              (grid_points - 1);

  /* Shrink well past the requested bracket width: the dual of a finite
   * CMDP is piecewise linear, so the value error at the returned point
   * scales with the bracket width times the local subgradient, not its
   * square.  A few extra golden-section steps make the value error
   * negligible while the returned bracket still satisfies hi - lo <= tol. */
  const double shrink_target = std::max(tol * 1e-3, 1e-13);
  const double inv_phi = 0.6180339887498949; /* golden-section shrink factor */
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = dual_value(x1), f2 = dual_value(x2);
  while (hi - lo > shrink_target) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = dual_value(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = dual_value(x2);
    }
  }

  DualScanResult out;
  out.lo = lo;
  out.hi = hi;
  out.lambda_star = 0.5 * (lo + hi);
  out.value = dual_value(out.lambda_star);
  return out;
}

/* ------------------------------------------------------------------ */
/* Regularized-saddle reference                                        */
/* ------------------------------------------------------------------ */

struct SaddleRef {
  TabularPolicy pi_tau;     /* strictly positive */
  double lambda_tau = 0.0;  /* in [0, lambda_max] */
  double tau = 0.0;
  double residual = 0.0;    /* final movement / (eta*tau); <= the stop tol */
};

struct SaddleNotConverged : std::runtime_error {
  SaddleRef best;
  explicit SaddleNotConverged(SaddleRef b)
      : std::runtime_error("regularized_saddle: iteration cap exceeded at residual " +
                           std::to_string(b.residual)),
        best(std::move(b)) {}
};

/*
 * Computes the unique saddle of the entropy/quadratic-regularized Lagrangian
 * L_tau(pi,lambda) = V_{r+lambda*g}^pi(rho) + tau*(H(pi) + lambda^2/2) to
 * fixed-point accuracy, by running the exact single-time-scale mirror
 * ascent / projected descent recursion on the unrestricted simplex (the
 * update is re-derived here rather than reusing the solver module, so the
 * reference stays an independent oracle).  Stops when the per-step movement
 * max_sa |pi' - pi| + |lambda' - lambda| falls to tol*eta*tau.
 */
inline SaddleRef regularized_saddle(const Cmdp& mdp, double tau, double tol,
                                    long max_iters = 5'000'000) {
  if (!(tau > 0.0)) throw std::invalid_argument("regularized_saddle: tau must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("regularized_saddle: tol must be positive");
  const FeasibilityCert cert = certify_feasibility(mdp);
  if (!cert.strict())
    throw std::invalid_argument("regularized_saddle: requires strict feasibility (xi > 0)");

  /* Conservative stepsize: well under 1/C with a small-eps0 proxy for the
   * (unbounded at eps0=0) gradient constant. */
  const double c_proxy = c_tau_xi_eps0(mdp.gamma, cert.xi, tau, 1e-3, mdp.n_actions);
  const double eta = std::min(0.05, 0.9 / c_proxy);

  const int S = mdp.n_states, A = mdp.n_actions;
  const RestrictedSimplex full_simplex(A, 0.0);
  TabularPolicy pi = TabularPolicy::uniform(S, A);
  double lambda = 0.0;
  const std::vector<double> g = mdp.g_table();

  double movement = std::numeric_limits<double>::infinity();
  for (long t = 0; t < max_iters; ++t) {
    const std::vector<double> q = soft_q(mdp, pi, lambda, tau);
    const double v_g = rho_dot(mdp, evaluate_v(mdp, pi, g));

    TabularPolicy pi_next = pi;
    for (int s = 0; s < S; ++s) {
      std::vector<double> grad(A);
      for (int a = 0; a < A; ++a) grad[a] = q[mdp.sa(s, a)];
      pi_next.set_row(s, mwu_step(pi.row(s), grad, eta, full_simplex));
    }
    const double lambda_next =
        project_interval((1.0 - eta * tau) * lambda - eta * v_g, 0.0, cert.lambda_max);

    double dpi = 0.0;
    for (std::size_t i = 0; i < pi.probs.size(); ++i)
      dpi = std::max(dpi, std::abs(pi_next.probs[i] - pi.probs[i]));
    movement = dpi + std::abs(lambda_next - lambda);

    pi = pi_next;
    lambda = lambda_next;
    if (movement <= tol * eta * tau) {
      SaddleRef ref;
      ref.pi_tau = pi;
      ref.lambda_tau = lambda;
      ref.tau = tau;
      ref.residual = movement / (eta * tau);
      return ref;
    }
  }
  SaddleRef best;
  best.pi_tau = pi;
  best.lambda_tau = lambda;
  best.tau = tau;
  best.residual = movement / (eta * tau);
  throw SaddleNotConverged(std::move(best));
}

/* ------------------------------------------------------------------ */
/* Brute-force policy grid search                                      */
/* ------------------------------------------------------------------ */

struct BruteForceResult {
  bool found = false;     /* false when no grid policy is feasible */
  TabularPolicy pi;
  double value = -std::numeric_limits<double>::infinity();
};

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

/* Simplex grid rows: all compositions of (grid-1) into n_actions parts,
 * scaled to probabilities.  Enumerated with the leading coordinate heaviest
 * first, so "earlier" rows put more mass on lower action indices; ties in
 * the search are broken toward the first-enumerated (lower-index) policy. */
inline void enumerate_rows(int n_actions, int grid, std::vector<std::vector<double>>& out) {
  const int ticks = grid - 1;
  std::vector<int> counts(n_actions, 0);
  const std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == n_actions - 1) {
      counts[pos] = remaining;
      std::vector<double> row(n_actions);
      for (int a = 0; a < n_actions; ++a)
        row[a] = static_cast<double>(counts[a]) / static_cast<double>(ticks);
      out.push_back(std::move(row));
      return;
    }
    for (int c = remaining; c >= 0; --c) {
      counts[pos] = c;
      rec(pos + 1, remaining - c);
    }
  };
  rec(0, ticks);
}

}  // namespace detail

/*
 * Exhaustive search over product grids of policy rows (uniform spacing,
 * endpoints included): returns the best exactly-evaluated policy among those
 * with V_g^pi(rho) >= -1e-9, or found=false when the grid holds no feasible
 * policy.  The budget precondition grid^(S*(A-1)) <= 1e7 is enforced.
 */
inline BruteForceResult brute_force(const Cmdp& mdp, int grid) {
  if (grid < 2) throw std::invalid_argument("brute_force: grid must be >= 2");
  const int S = mdp.n_states, A = mdp.n_actions;
  const double budget =
      std::pow(static_cast<double>(grid), static_cast<double>(S) * (A - 1));
  if (!(budget <= 1e7))
    throw BudgetExceeded("brute_force: grid^(S*(A-1)) = " + std::to_string(budget) +
                         " exceeds the 1e7 budget");

  std::vector<std::vector<double>> rows;
  detail::enumerate_rows(A, grid, rows);
  const std::size_t n_rows = rows.size();

  BruteForceResult best;
  const std::vector<double> g = mdp.g_table();

  TabularPolicy pi = TabularPolicy::uniform(S, A);
  std::vector<std::size_t> odo(S, 0);
  for (;;) {
    for (int s = 0; s < S; ++s) pi.set_row(s, rows[odo[s]]);
    const double v_g = rho_dot(mdp, evaluate_v(mdp, pi, g));
    if (v_g >= -1e-9) {
      const double v_r = rho_dot(mdp, evaluate_v(mdp, pi, mdp.reward));
      if (v_r > best.value) {
        best.found = true;
        best.value = v_r;
        best.pi = pi;
      }
    }
    /* odometer over per-state row choices */
    int s = S - 1;
    while (s >= 0) {
      if (++odo[s] < n_rows) break;
      odo[s] = 0;
      --s;
    }
    if (s < 0) break;
  }
  return best;
}

}  // namespace cmdplab
