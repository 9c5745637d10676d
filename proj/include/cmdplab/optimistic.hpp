#pragma once

/*
 * Optimistic (extrapolated) primal-dual methods.
 *
 * Policy space: two policy sequences and two dual sequences.  The record
 * kept between steps is time-aligned: (pi_t, pi_hat_t, lambda_t,
 * lambda_hat_t).  A step evaluates ONE gradient, at the current prediction
 * (pi_t, lambda_t), and applies it twice:
 *     anchor:      pi_hat_{t+1} = P(pi_hat_t + eta * G_t)
 *     prediction:  pi_{t+1}     = P(pi_hat_{t+1} + eta * G_t)
 * (duals mirror this with descent on V_g), which reproduces the classic
 * optimistic-gradient recursion "prediction uses the previous gradient"
 * exactly.  The projection P is Euclidean per state row (OPG-PD) or the
 * KL/multiplicative-weights proximal step (OMWU-PD).
 *
 * Occupancy space: the same two-sequence scheme on z = (q, lambda, mu) for
 * the bilinear Lagrangian L = <r + lambda*g, q> + mu'(rho - (E - gamma*P)'q),
 * with componentwise box projections.
 */

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/constants.hpp"
#include "cmdplab/geometry.hpp"

namespace cmdplab {

/* ------------------------------------------------------------------ */
/* Policy-space optimistic methods (Euclidean and KL-proximal)         */
/* ------------------------------------------------------------------ */

struct OptimisticIterate {
  TabularPolicy pi;       /* prediction pi_t */
  TabularPolicy pi_hat;   /* anchor pi_hat_t */
  double lambda = 0.0;
  double lambda_hat = 0.0;

  /* Both sequences start together: (pi_hat_0, lambda_hat_0) = (pi_0, lambda_0). */
  static OptimisticIterate start(const Cmdp& mdp) {
    OptimisticIterate it;
    it.pi = TabularPolicy::uniform(mdp.n_states, mdp.n_actions);
    it.pi_hat = it.pi;
    it.lambda = 0.0;
    it.lambda_hat = 0.0;
    return it;
  }
};

namespace detail {

template <typename RowStep>
OptimisticIterate optimistic_step(const Cmdp& mdp, const OptimisticIterate& it, double eta,
                                  double lambda_max, RowStep&& row_step) {
  const int S = mdp.n_states, A = mdp.n_actions;
  const std::vector<double> q = evaluate_q(mdp, it.pi, lagrangian_signal(mdp, it.lambda));
  const double v_g = constraint_value(mdp, it.pi);

  OptimisticIterate next = it;
  std::vector<double> grad(A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) grad[a] = q[mdp.sa(s, a)];
    const std::vector<double> anchor = row_step(it.pi_hat.row(s), grad);
    next.pi_hat.set_row(s, anchor);
    next.pi.set_row(s, row_step(anchor, grad));
  }
  next.lambda_hat = project_interval(it.lambda_hat - eta * v_g, 0.0, lambda_max);
  next.lambda = project_interval(next.lambda_hat - eta * v_g, 0.0, lambda_max);
  return next;
}

}  // namespace detail

/* Projected Q-ascent variant: Euclidean simplex projections. */
inline OptimisticIterate opgpd_step(const Cmdp& mdp, const OptimisticIterate& it, double eta,
                                    double lambda_max) {
  return detail::optimistic_step(
      mdp, it, eta, lambda_max,
      [eta](const std::vector<double>& row, const std::vector<double>& grad) {
        return euclid_ascent_step(row, grad, eta);
      });
}

/* Multiplicative-weights variant: KL proximal steps on the plain simplex. */
inline OptimisticIterate omwupd_step(const Cmdp& mdp, const OptimisticIterate& it, double eta,
                                     double lambda_max) {
  const RestrictedSimplex full(mdp.n_actions, 0.0);
  return detail::optimistic_step(
      mdp, it, eta, lambda_max,
      [eta, &full](const std::vector<double>& row, const std::vector<double>& grad) {
        return mwu_step(row, grad, eta, full);
      });
}

/* ------------------------------------------------------------------ */
/* Occupancy-space optimistic primal-dual                              */
/* ------------------------------------------------------------------ */

struct OpdIterate {
  std::vector<double> q, q_hat;   /* [s*A + a] in [0, 1/(1-gamma)] */
  double lambda = 0.0, lambda_hat = 0.0;
  std::vector<double> mu, mu_hat; /* per state in [-mu_max, mu_max] */

  /* Uniform start: q spreads each state's initial mass over actions at the
   * stationary scale rho(s)/(|A|(1-gamma)); multipliers start at zero. */
  static OpdIterate start(const Cmdp& mdp) {
    OpdIterate it;
    const double scale = 1.0 / (1.0 - mdp.gamma);
    it.q.resize(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a)
        it.q[mdp.sa(s, a)] = mdp.init_dist[s] * scale / mdp.n_actions;
    it.q_hat = it.q;
    it.mu.assign(mdp.n_states, 0.0);
    it.mu_hat = it.mu;
    return it;
  }
};

struct OpdConfig {
  double eta = 0.0;
  double lambda_max = 0.0;
  double mu_max = 0.0;   /* (1-gamma+1/xi)/(1-gamma)^2 from the certificate */
};

struct OpdGradient {
  std::vector<double> d_q;    /* dL/dq(s,a) = r + lambda*g - mu(s) + gamma*E_{s'} mu(s') */
  double d_lambda = 0.0;      /* dL/dlambda = <g, q> */
  std::vector<double> d_mu;   /* dL/dmu(s') = rho(s') - (flow of q into s') */
};

inline OpdGradient opd_gradient(const Cmdp& mdp, const std::vector<double>& q, double lambda,
                                const std::vector<double>& mu) {
  const int S = mdp.n_states, A = mdp.n_actions;
  OpdGradient out;
  out.d_q.resize(static_cast<std::size_t>(S) * A);
  out.d_mu.assign(mdp.init_dist.begin(), mdp.init_dist.end());
  const std::vector<double> g = mdp.g_table();
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const std::size_t i = mdp.sa(s, a);
      double next_mu = 0.0;
      for (int s2 = 0; s2 < S; ++s2) next_mu += mdp.p(s, a, s2) * mu[s2];
      out.d_q[i] = mdp.reward[i] + lambda * g[i] - mu[s] + mdp.gamma * next_mu;
      out.d_lambda += g[i] * q[i];
      out.d_mu[s] -= q[i];
      for (int s2 = 0; s2 < S; ++s2) out.d_mu[s2] += mdp.gamma * mdp.p(s, a, s2) * q[i];
    }
  }
  return out;
}

/*
 * One optimistic step on z = (q, lambda, mu): ascent in q, descent in
 * (lambda, mu), gradient evaluated once at the prediction z_t, anchors
 * updated first and the fresh prediction re-projected from them.
 */
inline OpdIterate opd_step(const Cmdp& mdp, const OpdIterate& it, const OpdConfig& cfg) {
  const double q_hi = 1.0 / (1.0 - mdp.gamma);
  const OpdGradient grad = opd_gradient(mdp, it.q, it.lambda, it.mu);

  OpdIterate next = it;
  const std::size_t n_q = it.q.size();
  for (std::size_t i = 0; i < n_q; ++i)
    next.q_hat[i] = project_interval(it.q_hat[i] + cfg.eta * grad.d_q[i], 0.0, q_hi);
  next.lambda_hat = project_interval(it.lambda_hat - cfg.eta * grad.d_lambda, 0.0, cfg.lambda_max);
  for (int s = 0; s < mdp.n_states; ++s)
    next.mu_hat[s] =
        project_interval(it.mu_hat[s] - cfg.eta * grad.d_mu[s], -cfg.mu_max, cfg.mu_max);

  for (std::size_t i = 0; i < n_q; ++i)
    next.q[i] = project_interval(next.q_hat[i] + cfg.eta * grad.d_q[i], 0.0, q_hi);
  next.lambda = project_interval(next.lambda_hat - cfg.eta * grad.d_lambda, 0.0, cfg.lambda_max);
  for (int s = 0; s < mdp.n_states; ++s)
    next.mu[s] = project_interval(next.mu_hat[s] - cfg.eta * grad.d_mu[s], -cfg.mu_max, cfg.mu_max);
  return next;
}

struct RecoveredPolicy {
  TabularPolicy pi;
  bool had_zero_rows = false; /* states whose q-row vanished got uniform rows */
};

/* Policy recovery pi(a|s) = q(s,a)/sum_a' q(s,a'). */
inline RecoveredPolicy opd_policy(const Cmdp& mdp, const std::vector<double>& q) {
  const int S = mdp.n_states, A = mdp.n_actions;
  RecoveredPolicy out;
  out.pi.n_states = S;
  out.pi.n_actions = A;
  out.pi.probs.resize(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    double mass = 0.0;
    for (int a = 0; a < A; ++a) mass += q[mdp.sa(s, a)];
    if (mass > 1e-15) {
      double row_sum = 0.0;
      for (int a = 0; a < A; ++a) {
        out.pi.probs[mdp.sa(s, a)] = q[mdp.sa(s, a)] / mass;
        row_sum += out.pi.probs[mdp.sa(s, a)];
      }
      for (int a = 0; a < A; ++a) out.pi.probs[mdp.sa(s, a)] /= row_sum;
    } else {
      out.had_zero_rows = true;
      for (int a = 0; a < A; ++a) out.pi.probs[mdp.sa(s, a)] = 1.0 / static_cast<double>(A);
    }
  }
  return out;
}

/* Bellman-flow infeasibility of an occupancy candidate, in the max norm. */
inline double flow_residual(const Cmdp& mdp, const std::vector<double>& q) {
  const int S = mdp.n_states, A = mdp.n_actions;
  double worst = 0.0;
  for (int s2 = 0; s2 < S; ++s2) {
    double r = mdp.init_dist[s2];
    for (int a = 0; a < A; ++a) r -= q[mdp.sa(s2, a)];
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) r += mdp.gamma * mdp.p(s, a, s2) * q[mdp.sa(s, a)];
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace cmdplab
