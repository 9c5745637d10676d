#pragma once

/*
 * Regularized policy-gradient primal-dual method (tabular).
 *
 * One step, from the current (pi_t, lambda_t):
 *  - policy:  per-state KL mirror ascent over the restricted simplex with the
 *    entropy-augmented gradient Q_{r + lambda_t*g + tau*psi_t}^{pi_t},
 *    psi_t = -log pi_t;
 *  - dual:    lambda_{t+1} = P_[0,lambda_max]((1 - eta*tau)*lambda_t
 *             - eta*V_g^{pi_t}(rho)), the closed form of the quadratic
 *             proximal dual update.
 * Both halves read only time-t quantities, so the method is single
 * time scale: computing them in either order gives identical iterates.
 */

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/constants.hpp"
#include "cmdplab/geometry.hpp"

namespace cmdplab {

struct RpgPdConfig {
  double eta = 0.1;          /* stepsize, > 0 (0 allowed: identity step) */
  double tau = 0.08;         /* entropy/quadratic regularization, >= 0 */
  double eps0 = 1e-6;        /* restricted-simplex parameter in [0,1) */
  double lambda_max = 0.0;   /* dual cap; take FeasibilityCert::lambda_max by default */

  void validate() const {
    if (!(eta >= 0.0)) throw std::invalid_argument("RpgPdConfig: eta must be >= 0");
    if (!(tau >= 0.0)) throw std::invalid_argument("RpgPdConfig: tau must be >= 0");
    if (!(eps0 >= 0.0 && eps0 < 1.0))
      throw std::invalid_argument("RpgPdConfig: eps0 must lie in [0,1)");
    if (!(lambda_max >= 0.0)) throw std::invalid_argument("RpgPdConfig: lambda_max must be >= 0");
  }

  /*
   * Theoretical stepsize ceiling 1/C for the given instance constants;
   * exceeding it is legal (the experiment protocol does) and merely warned
   * about by the run drivers.
   */
  double stepsize_ceiling(double gamma, double xi, int n_actions) const {
    const double c = c_tau_xi_eps0(gamma, xi, tau, eps0, n_actions);
    return 1.0 / c; /* 0 when eps0 = 0 makes C infinite */
  }
};

struct PrimalDualIterate {
  TabularPolicy pi;
  double lambda = 0.0;

  static PrimalDualIterate start(const Cmdp& mdp) {
    return {TabularPolicy::uniform(mdp.n_states, mdp.n_actions), 0.0};
  }
};

inline PrimalDualIterate rpgpd_step(const Cmdp& mdp, const PrimalDualIterate& it,
                                    const RpgPdConfig& cfg) {
  cfg.validate();
  const int S = mdp.n_states, A = mdp.n_actions;
  const RestrictedSimplex set(A, cfg.eps0);

  const std::vector<double> q = soft_q(mdp, it.pi, it.lambda, cfg.tau);
  const double v_g = constraint_value(mdp, it.pi);

  PrimalDualIterate next = it;
  std::vector<double> grad(A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) grad[a] = q[mdp.sa(s, a)];
    next.pi.set_row(s, mwu_step(it.pi.row(s), grad, cfg.eta, set));
  }
  next.lambda = project_interval((1.0 - cfg.eta * cfg.tau) * it.lambda - cfg.eta * v_g, 0.0,
                                 cfg.lambda_max);
  return next;
}

/*
 * The explicit softmax (natural-policy-gradient) form of the same update:
 * pi_{t+1}(a|s) proportional to pi_t(a|s) * exp(eta * Q(s,a)), written out
 * directly without the log-domain rearrangement.  Only defined on the
 * unrestricted simplex (eps0 = 0), where it must coincide with rpgpd_step;
 * the unit tests assert agreement to 1e-10.
 */
inline PrimalDualIterate rpgpd_explicit_step(const Cmdp& mdp, const PrimalDualIterate& it,
                                             const RpgPdConfig& cfg) {
  cfg.validate();
  if (cfg.eps0 != 0.0)
    throw std::invalid_argument("rpgpd_explicit_step: the explicit form requires eps0 = 0");
  const int S = mdp.n_states, A = mdp.n_actions;

  const std::vector<double> q = soft_q(mdp, it.pi, it.lambda, cfg.tau);
  const double v_g = constraint_value(mdp, it.pi);

  PrimalDualIterate next = it;
  for (int s = 0; s < S; ++s) {
    std::vector<double> w(A);
    double z = 0.0;
    for (int a = 0; a < A; ++a) {
      const double p = it.pi.prob(s, a);
      if (!(p > 0.0))
        throw std::invalid_argument("rpgpd_explicit_step: policy must be strictly positive");
      w[a] = p * std::exp(cfg.eta * q[mdp.sa(s, a)]);
      z += w[a];
    }
    for (int a = 0; a < A; ++a) next.pi.prob(s, a) = w[a] / z;
  }
  next.lambda = project_interval((1.0 - cfg.eta * cfg.tau) * it.lambda - cfg.eta * v_g, 0.0,
                                 cfg.lambda_max);
  return next;
}

}  // namespace cmdplab
