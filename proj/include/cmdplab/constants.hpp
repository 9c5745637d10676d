#pragma once

/*
 * Problem-dependent constants used by stepsize rules and convergence bounds.
 * Shared by the reference oracles (stepsize selection) and the diagnostics.
 */

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cmdplab {

/*
 * Soft-Q gradient bound over the restricted simplex:
 * C = (1 + 1/((1-gamma)xi) + tau*log|A|)/(1-gamma) - tau*log(eps0/|A|).
 * The regularized-ascent stepsize rule is eta <= 1/C.  eps0 = 0 gives +inf
 * (the restricted simplex degenerates and the log-policy term is unbounded).
 */
inline double c_tau_xi_eps0(double gamma, double xi, double tau, double eps0, int n_actions) {
  if (!(xi > 0.0)) throw std::invalid_argument("c_tau_xi_eps0: requires strict feasibility xi > 0");
  if (eps0 <= 0.0) return std::numeric_limits<double>::infinity();
  const double a = static_cast<double>(n_actions);
  return (1.0 + 1.0 / ((1.0 - gamma) * xi) + tau * std::log(a)) / (1.0 - gamma) -
         tau * std::log(eps0 / a);
}

/* Dual-gradient bound C' = (1 + tau/xi)/(1-gamma). */
inline double c_prime_tau_xi(double gamma, double xi, double tau) {
  if (!(xi > 0.0)) throw std::invalid_argument("c_prime_tau_xi: requires strict feasibility xi > 0");
  return (1.0 + tau / xi) / (1.0 - gamma);
}

/* Gradient bound for the W-ball regression variant: C_W = 2W/(1-gamma). */
inline double c_w(double w_cap, double gamma) { return 2.0 * w_cap / (1.0 - gamma); }

/* Mismatch constant max(kappa_rho/(1-gamma), 1) from the optimistic analysis. */
inline double kappa_rho_gamma(double kappa_rho, double gamma) {
  return std::max(kappa_rho / (1.0 - gamma), 1.0);
}

/* Dual-variable cap 1/((1-gamma)xi) induced by the Slater slack. */
inline double lambda_cap(double gamma, double xi) {
  if (!(xi > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / ((1.0 - gamma) * xi);
}

/* Occupancy-space multiplier cap mu_max = (1-gamma+1/xi)/(1-gamma)^2. */
inline double mu_cap(double gamma, double xi) {
  if (!(xi > 0.0)) return std::numeric_limits<double>::infinity();
  return (1.0 - gamma + 1.0 / xi) / ((1.0 - gamma) * (1.0 - gamma));
}

/*
 * Conservative operator-norm bound on the occupancy-space bilinear coupling,
 * used by the occupancy-space optimistic stepsize rule eta < 1/(8 L_f):
 * L_f = 1 + lambda_max + mu_max*(1+gamma)*sqrt(|S|).
 */
inline double l_f_bound(double lambda_max, double mu_max, double gamma, int n_states) {
  return 1.0 + lambda_max + mu_max * (1.0 + gamma) * std::sqrt(static_cast<double>(n_states));
}

}  // namespace cmdplab
