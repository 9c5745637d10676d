#pragma once

/*
 * Tabular constrained-MDP model and exact evaluation.
 *
 * A Cmdp bundles (S, A, P, r, u, b, gamma, rho).  The constraint signal is
 * always the derived g(s,a) = u(s,a) - (1-gamma)*b, never stored, so edits to
 * the threshold (in particular the conservative transform b <- b + delta)
 * stay consistent by construction.  The constraint reads V_g^pi(rho) >= 0.
 *
 * Evaluation is exact: V solves the dense linear Bellman system
 * (I - gamma*P_pi) V = f_pi by LU factorization, which at desk scale gives
 * bit-stable, residual-checked values (no value-iteration truncation error).
 */

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmdplab {

struct TabularPolicy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> probs;  /* [s*n_actions + a] */

  static TabularPolicy uniform(int n_states, int n_actions) {
    TabularPolicy pi;
    pi.n_states = n_states;
    pi.n_actions = n_actions;
    pi.probs.assign(static_cast<std::size_t>(n_states) * n_actions,
                    1.0 / static_cast<double>(n_actions));
    return pi;
  }

  double prob(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
  double& prob(int s, int a) { return probs[static_cast<std::size_t>(s) * n_actions + a]; }

  std::vector<double> row(int s) const {
    return {probs.begin() + static_cast<std::ptrdiff_t>(s) * n_actions,
            probs.begin() + static_cast<std::ptrdiff_t>(s + 1) * n_actions};
  }
  void set_row(int s, const std::vector<double>& r) {
    if (static_cast<int>(r.size()) != n_actions)
      throw std::invalid_argument("TabularPolicy::set_row: wrong length");
    std::copy(r.begin(), r.end(), probs.begin() + static_cast<std::ptrdiff_t>(s) * n_actions);
  }

  void validate() const {
    if (n_states < 1 || n_actions < 1 ||
        probs.size() != static_cast<std::size_t>(n_states) * n_actions)
      throw std::invalid_argument("TabularPolicy: bad shape");
    for (int s = 0; s < n_states; ++s) {
      double sum = 0.0;
      for (int a = 0; a < n_actions; ++a) {
        const double p = prob(s, a);
        if (!(p >= 0.0) || !std::isfinite(p))
          throw std::invalid_argument("TabularPolicy: negative or non-finite probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("TabularPolicy: row " + std::to_string(s) +
                                    " does not sum to 1 within 1e-12");
    }
  }
};

struct Cmdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;  /* [(s*n_actions + a)*n_states + s'] */
  std::vector<double> reward;      /* [s*n_actions + a], in [0,1] */
  std::vector<double> utility;     /* [s*n_actions + a]; [0,1] strict mode, [-1,1] raw-g mode */
  double b = 0.0;                  /* constraint threshold; 0 in raw-g mode */
  double gamma = 0.0;              /* discount in [0,1) */
  std::vector<double> init_dist;   /* rho, probability row over states */

  std::size_t sa(int s, int a) const { return static_cast<std::size_t>(s) * n_actions + a; }
  double p(int s, int a, int s2) const { return transition[sa(s, a) * n_states + s2]; }

  /* Shifted constraint signal g = u - (1-gamma)*b, derived on demand. */
  double g(int s, int a) const { return utility[sa(s, a)] - (1.0 - gamma) * b; }
  std::vector<double> g_table() const {
    std::vector<double> out(utility.size());
    const double shift = (1.0 - gamma) * b;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = utility[i] - shift;
    return out;
  }

  /*
   * Section-faithful constructor: u in [0,1] and b strictly positive, so the
   * derived g automatically lies in [-1,1].
   */
  static Cmdp strict(int n_states, int n_actions, std::vector<double> transition,
                     std::vector<double> reward, std::vector<double> utility, double b,
                     double gamma, std::vector<double> init_dist) {
    Cmdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.transition = std::move(transition);
    m.reward = std::move(reward);
    m.utility = std::move(utility);
    m.b = b;
    m.gamma = gamma;
    m.init_dist = std::move(init_dist);
    m.validate();
    if (!(m.b > 0.0)) throw std::invalid_argument("Cmdp::strict: b must be positive");
    for (double u : m.utility)
      if (u < 0.0) throw std::invalid_argument("Cmdp::strict: utility must lie in [0,1]");
    return m;
  }

  /*
   * Experiment-protocol constructor: the signed constraint signal g in [-1,1]
   * is supplied directly; the threshold is folded to b = 0 so g == u.
   */
  static Cmdp raw_g(int n_states, int n_actions, std::vector<double> transition,
                    std::vector<double> reward, std::vector<double> g_signal, double gamma,
                    std::vector<double> init_dist) {
    Cmdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.transition = std::move(transition);
    m.reward = std::move(reward);
    m.utility = std::move(g_signal);
    m.b = 0.0;
    m.gamma = gamma;
    m.init_dist = std::move(init_dist);
    m.validate();
    return m;
  }

  void validate() const {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("Cmdp: empty state/action space");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("Cmdp: gamma must lie in [0,1)");
    const std::size_t n_sa = static_cast<std::size_t>(n_states) * n_actions;
    if (transition.size() != n_sa * n_states || reward.size() != n_sa || utility.size() != n_sa ||
        init_dist.size() != static_cast<std::size_t>(n_states))
      throw std::invalid_argument("Cmdp: table shape mismatch");
    for (std::size_t row = 0; row < n_sa; ++row) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double p = transition[row * n_states + s2];
        if (!(p >= 0.0) || !std::isfinite(p))
          throw std::invalid_argument("Cmdp: negative or non-finite transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("Cmdp: transition row does not sum to 1 within 1e-12");
    }
    for (double r : reward)
      if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("Cmdp: reward out of [0,1]");
    for (double u : utility)
      if (!(u >= -1.0 && u <= 1.0)) throw std::invalid_argument("Cmdp: utility out of [-1,1]");
    if (!(b >= 0.0 && b <= 1.0 / (1.0 - gamma)))
      throw std::invalid_argument("Cmdp: threshold b out of [0, 1/(1-gamma)]");
    double rho_sum = 0.0;
    for (double r : init_dist) {
      if (!(r >= 0.0) || !std::isfinite(r))
        throw std::invalid_argument("Cmdp: negative or non-finite initial probability");
      rho_sum += r;
    }
    if (std::abs(rho_sum - 1.0) > 1e-12)
      throw std::invalid_argument("Cmdp: initial distribution does not sum to 1 within 1e-12");
  }
};

struct OccupancyMeasure {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> q;  /* [s*n_actions + a], discounted visit mass */

  double at(int s, int a) const { return q[static_cast<std::size_t>(s) * n_actions + a]; }
  double state_mass(int s) const {
    double m = 0.0;
    for (int a = 0; a < n_actions; ++a) m += at(s, a);
    return m;
  }
};

struct ValueBundle {
  std::vector<double> v_r, v_u, v_g;  /* per-state values */
  double v_r_rho = 0.0, v_u_rho = 0.0, v_g_rho = 0.0;
};

/* Expectation of a per-state vector under the initial distribution. */
inline double rho_dot(const Cmdp& mdp, const std::vector<double>& v) {
  double out = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) out += mdp.init_dist[s] * v[s];
  return out;
}

/* Composite signal r + lambda*g used by every Lagrangian evaluation. */
inline std::vector<double> lagrangian_signal(const Cmdp& mdp, double lambda) {
  std::vector<double> f(mdp.reward.size());
  const double shift = (1.0 - mdp.gamma) * mdp.b;
  for (std::size_t i = 0; i < f.size(); ++i)
    f[i] = mdp.reward[i] + lambda * (mdp.utility[i] - shift);
  return f;
}

namespace detail {

/* Policy-averaged kernel P_pi (S x S) and signal f_pi (S). */
inline void policy_average(const Cmdp& mdp, const TabularPolicy& pi,
                           const std::vector<double>& signal, Eigen::MatrixXd& p_pi,
                           Eigen::VectorXd& f_pi) {
  const int S = mdp.n_states, A = mdp.n_actions;
  p_pi.setZero(S, S);
  f_pi.setZero(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double w = pi.prob(s, a);
      if (w == 0.0) continue;
      f_pi(s) += w * signal[mdp.sa(s, a)];
      for (int s2 = 0; s2 < S; ++s2) p_pi(s, s2) += w * mdp.p(s, a, s2);
    }
  }
}

}  // namespace detail

/*
 * Exact policy evaluation of an arbitrary per-(s,a) signal: solves the linear
 * Bellman system (I - gamma*P_pi) V = f_pi.  The matrix is strictly
 * diagonally dominant for gamma < 1, so the LU solve cannot fail.
 */
inline std::vector<double> evaluate_v(const Cmdp& mdp, const TabularPolicy& pi,
                                      const std::vector<double>& signal) {
  if (signal.size() != mdp.reward.size())
    throw std::invalid_argument("evaluate_v: signal shape mismatch");
  for (double v : signal)
    if (!std::isfinite(v)) throw std::invalid_argument("evaluate_v: non-finite signal");
  const int S = mdp.n_states;
  Eigen::MatrixXd p_pi;
  Eigen::VectorXd f_pi;
  detail::policy_average(mdp, pi, signal, p_pi, f_pi);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * p_pi;
  Eigen::VectorXd v = a.partialPivLu().solve(f_pi);
  return {v.data(), v.data() + S};
}

/* Q(s,a) = f(s,a) + gamma * E_{s'}[V(s')] with V = evaluate_v. */
inline std::vector<double> evaluate_q(const Cmdp& mdp, const TabularPolicy& pi,
                                      const std::vector<double>& signal) {
  const std::vector<double> v = evaluate_v(mdp, pi, signal);
  std::vector<double> q(signal.size());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double next = 0.0;
      for (int s2 = 0; s2 < mdp.n_states; ++s2) next += mdp.p(s, a, s2) * v[s2];
      q[mdp.sa(s, a)] = signal[mdp.sa(s, a)] + mdp.gamma * next;
    }
  return q;
}

/*
 * Entropy-augmented state-action value Q_{r+lambda*g+tau*psi}^pi with
 * psi = -log pi.  Solved exactly: with f = r + lambda*g, the augmented state
 * value V obeys (I - gamma*P_pi) V = c_pi where
 * c_pi(s) = sum_a pi(a|s) (f(s,a) - tau*log pi(a|s)), and the returned table
 * is Q(s,a) = f(s,a) - tau*log pi(a|s) + gamma*E_{s'}[V(s')].
 * With tau = 0 this reduces to evaluate_q on r + lambda*g.
 */
inline std::vector<double> soft_q(const Cmdp& mdp, const TabularPolicy& pi, double lambda,
                                  double tau) {
  if (tau < 0.0) throw std::invalid_argument("soft_q: tau must be nonnegative");
  const std::vector<double> f = lagrangian_signal(mdp, lambda);
  if (tau == 0.0) return evaluate_q(mdp, pi, f);

  const int S = mdp.n_states, A = mdp.n_actions;
  std::vector<double> f_aug(f.size());
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double p = pi.prob(s, a);
      if (!(p > 0.0))
        throw std::invalid_argument("soft_q: policy must be strictly positive when tau > 0");
      f_aug[mdp.sa(s, a)] = f[mdp.sa(s, a)] - tau * std::log(p);
    }

  Eigen::MatrixXd p_pi;
  Eigen::VectorXd c_pi;
  detail::policy_average(mdp, pi, f_aug, p_pi, c_pi);
  Eigen::MatrixXd a_mat = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * p_pi;
  Eigen::VectorXd v = a_mat.partialPivLu().solve(c_pi);

  std::vector<double> q(f.size());
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      double next = 0.0;
      for (int s2 = 0; s2 < S; ++s2) next += mdp.p(s, a, s2) * v(s2);
      q[mdp.sa(s, a)] = f_aug[mdp.sa(s, a)] + mdp.gamma * next;
    }
  return q;
}

/*
 * Discounted occupancy measure: the unnormalized visitation d~ solves the
 * flow system (I - gamma*P_pi^T) d~ = rho (so sum_s d~(s) = 1/(1-gamma)),
 * and q(s,a) = d~(s) * pi(a|s).
 */
inline OccupancyMeasure occupancy(const Cmdp& mdp, const TabularPolicy& pi) {
  const int S = mdp.n_states, A = mdp.n_actions;
  Eigen::MatrixXd p_pi;
  Eigen::VectorXd unused;
  detail::policy_average(mdp, pi, std::vector<double>(static_cast<std::size_t>(S) * A, 0.0), p_pi,
                         unused);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(S, S) - mdp.gamma * p_pi.transpose();
  Eigen::Map<const Eigen::VectorXd> rho(mdp.init_dist.data(), S);
  Eigen::VectorXd d = a.partialPivLu().solve(rho);

  OccupancyMeasure q;
  q.n_states = S;
  q.n_actions = A;
  q.q.resize(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s)
    for (int a2 = 0; a2 < A; ++a2) q.q[mdp.sa(s, a2)] = d(s) * pi.prob(s, a2);
  return q;
}

/* Discounted state visitation d_rho^pi(s) = (1-gamma) * sum_a q(s,a). */
inline std::vector<double> visitation(const Cmdp& mdp, const TabularPolicy& pi) {
  const OccupancyMeasure q = occupancy(mdp, pi);
  std::vector<double> d(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) d[s] = (1.0 - mdp.gamma) * q.state_mass(s);
  return d;
}

/*
 * Conservative-constraint transform: returns a copy whose derived g is
 * g - (1-gamma)*delta, realized as the threshold edit b <- b + delta; hence
 * V_{g'}^pi(rho) = V_g^pi(rho) - delta for every policy.  The overload taking
 * the Slater slack xi enforces the strict-feasibility precondition.
 */
inline Cmdp conservative(const Cmdp& mdp, double delta) {
  if (!(delta >= 0.0 && delta < 1.0))
    throw std::invalid_argument("conservative: delta must lie in [0,1)");
  Cmdp out = mdp;
  out.b = mdp.b + delta;
  out.validate();
  return out;
}

inline Cmdp conservative(const Cmdp& mdp, double delta, double xi) {
  if (delta >= xi)
    throw std::invalid_argument("conservative: delta >= xi destroys strict feasibility");
  return conservative(mdp, delta);
}

/* Reward, utility, and constraint values of a policy in one pass. */
inline ValueBundle value_bundle(const Cmdp& mdp, const TabularPolicy& pi) {
  ValueBundle out;
  out.v_r = evaluate_v(mdp, pi, mdp.reward);
  out.v_u = evaluate_v(mdp, pi, mdp.utility);
  out.v_g = evaluate_v(mdp, pi, mdp.g_table());
  out.v_r_rho = rho_dot(mdp, out.v_r);
  out.v_u_rho = rho_dot(mdp, out.v_u);
  out.v_g_rho = rho_dot(mdp, out.v_g);
  return out;
}

/* Constraint value V_g^pi(rho); the quantity the dual player reacts to. */
inline double constraint_value(const Cmdp& mdp, const TabularPolicy& pi) {
  return rho_dot(mdp, evaluate_v(mdp, pi, mdp.g_table()));
}

}  // namespace cmdplab
