#pragma once

/*
 * Log-linear function approximation and the sample-based solver layer.
 *
 * The policy class is pi_theta(a|s) = softmax_a(phi(s,a).theta) over a
 * feature map with ||phi(s,a)|| <= 1.  The approximate method replaces the
 * exact soft-Q gradient by phi(s,.)'w, where w solves (exactly, or by
 * projected SGD on unbiased rollout estimates) the compatible regression
 *   min_w E_(s,a)~nu [ (phi(s,a)'w - Q(s,a))^2 ].
 * After the first restricted-simplex projection the iterate leaves the
 * log-linear manifold, so the policy is carried as explicit rows from then
 * on; theta only parameterizes starting points.
 */

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/geometry.hpp"
#include "cmdplab/rng.hpp"
#include "cmdplab/rpgpd.hpp"

namespace cmdplab {

/* ------------------------------------------------------------------ */
/* Feature maps and log-linear policies                                */
/* ------------------------------------------------------------------ */

struct FeatureMap {
  int n_states = 0;
  int n_actions = 0;
  int dim = 0;
  std::vector<double> phi;  /* [(s*n_actions + a)*dim + j] */

  const double* at(int s, int a) const {
    return phi.data() + (static_cast<std::size_t>(s) * n_actions + a) * dim;
  }

  void validate() const {
    if (n_states < 1 || n_actions < 1 || dim < 1)
      throw std::invalid_argument("FeatureMap: empty shape");
    if (phi.size() != static_cast<std::size_t>(n_states) * n_actions * dim)
      throw std::invalid_argument("FeatureMap: table shape mismatch");
    for (int s = 0; s < n_states; ++s)
      for (int a = 0; a < n_actions; ++a) {
        double norm_sq = 0.0;
        const double* f = at(s, a);
        for (int j = 0; j < dim; ++j) {
          if (!std::isfinite(f[j])) throw std::invalid_argument("FeatureMap: non-finite entry");
          norm_sq += f[j] * f[j];
        }
        if (norm_sq > 1.0 + 1e-12)
          throw std::invalid_argument("FeatureMap: ||phi(s,a)|| exceeds 1");
      }
  }

  /* One-hot features phi(s,a) = e_{(s,a)}: the class that makes the
   * approximate method coincide with the tabular one. */
  static FeatureMap indicator(int n_states, int n_actions) {
    FeatureMap f;
    f.n_states = n_states;
    f.n_actions = n_actions;
    f.dim = n_states * n_actions;
    f.phi.assign(static_cast<std::size_t>(f.dim) * f.dim, 0.0);
    for (int i = 0; i < f.dim; ++i) f.phi[static_cast<std::size_t>(i) * f.dim + i] = 1.0;
    return f;
  }

  /* phi(s,.)'w for all actions of one state. */
  std::vector<double> scores(int s, const std::vector<double>& w) const {
    std::vector<double> out(n_actions, 0.0);
    for (int a = 0; a < n_actions; ++a) {
      const double* f = at(s, a);
      for (int j = 0; j < dim; ++j) out[a] += f[j] * w[j];
    }
    return out;
  }
};

struct LogLinearPolicy {
  FeatureMap features;
  std::vector<double> theta;
};

/* Materialize the softmax rows, max-subtracted for stability. */
inline TabularPolicy policy_rows(const LogLinearPolicy& p) {
  if (p.theta.size() != static_cast<std::size_t>(p.features.dim))
    throw std::invalid_argument("policy_rows: theta dimension mismatch");
  for (double t : p.theta)
    if (!std::isfinite(t)) throw std::invalid_argument("policy_rows: non-finite theta");

  const int S = p.features.n_states, A = p.features.n_actions;
  TabularPolicy pi;
  pi.n_states = S;
  pi.n_actions = A;
  pi.probs.resize(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    std::vector<double> sc = p.features.scores(s, p.theta);
    const double m = *std::max_element(sc.begin(), sc.end());
    double z = 0.0;
    for (int a = 0; a < A; ++a) {
      sc[a] = std::exp(sc[a] - m);
      z += sc[a];
    }
    for (int a = 0; a < A; ++a) pi.probs[static_cast<std::size_t>(s) * A + a] = sc[a] / z;
  }
  return pi;
}

/* ------------------------------------------------------------------ */
/* Compatible regression: exact and projected-SGD                      */
/* ------------------------------------------------------------------ */

struct RegressionReport {
  std::vector<double> w;
  double objective = std::nan("");  /* achieved E_(s,a)~dist[(phi'w - Q)^2] */
  double stat_gap = std::nan("");   /* objective minus the exact optimum, when known */
};

/* E_dist[(phi'w - target)^2] for an explicit weighting over (s,a). */
inline double regression_objective(const FeatureMap& feat, const std::vector<double>& w,
                                   const std::vector<double>& target,
                                   const std::vector<double>& dist) {
  double acc = 0.0;
  for (int s = 0; s < feat.n_states; ++s)
    for (int a = 0; a < feat.n_actions; ++a) {
      const std::size_t i = static_cast<std::size_t>(s) * feat.n_actions + a;
      if (dist[i] == 0.0) continue;
      double pred = 0.0;
      const double* f = feat.at(s, a);
      for (int j = 0; j < feat.dim; ++j) pred += f[j] * w[j];
      const double e = pred - target[i];
      acc += dist[i] * e * e;
    }
  return acc;
}

/*
 * Exact minimizer of the dist-weighted compatible regression against the
 * entropy-augmented Q of the given policy/multiplier: weighted least squares
 * sqrt(D) Phi w ~ sqrt(D) Q, solved by a complete orthogonal decomposition,
 * which returns the minimum-norm w on rank deficiency.
 */
inline RegressionReport exact_wstar(const Cmdp& mdp, const TabularPolicy& pi, double lambda,
                                    double tau, const FeatureMap& feat,
                                    const std::vector<double>& dist) {
  const int n_sa = feat.n_states * feat.n_actions;
  if (static_cast<int>(dist.size()) != n_sa)
    throw std::invalid_argument("exact_wstar: dist shape mismatch");
  const std::vector<double> q = soft_q(mdp, pi, lambda, tau);

  Eigen::MatrixXd a(n_sa, feat.dim);
  Eigen::VectorXd b(n_sa);
  for (int i = 0; i < n_sa; ++i) {
    const double wgt = std::sqrt(std::max(dist[i], 0.0));
    for (int j = 0; j < feat.dim; ++j) a(i, j) = wgt * feat.phi[static_cast<std::size_t>(i) * feat.dim + j];
    b(i) = wgt * q[i];
  }
  Eigen::VectorXd w = a.completeOrthogonalDecomposition().solve(b);

  RegressionReport out;
  out.w.assign(w.data(), w.data() + feat.dim);
  out.objective = regression_objective(feat, out.w, q, dist);
  out.stat_gap = 0.0;
  return out;
}

/* One labeled draw for the regression: an (s,a) pair and its unbiased
 * soft-Q estimate. */
struct QSample {
  int s = 0;
  int a = 0;
  double qhat = 0.0;
};

/*
 * Projected SGD on the compatible regression with the diminishing schedule
 * alpha_k = 2/(kappa0*(k+2)) and the weighted tail average
 * w_out = (2/(K(K+1))) * sum_{k=0}^{K-1} (k+1) w^k, starting from w^0 = 0;
 * each step clips back to the Euclidean ball of radius w_cap.
 */
inline RegressionReport sgd_w(const FeatureMap& feat, const std::function<QSample()>& draw,
                              double w_cap, double kappa0, int steps) {
  if (!(steps >= 1)) throw std::invalid_argument("sgd_w: steps must be >= 1");
  if (!(w_cap > 0.0)) throw std::invalid_argument("sgd_w: w_cap must be positive");
  if (!(kappa0 > 0.0)) throw std::invalid_argument("sgd_w: kappa0 must be positive");

  std::vector<double> w(feat.dim, 0.0), acc(feat.dim, 0.0);
  for (int k = 0; k < steps; ++k) {
    for (int j = 0; j < feat.dim; ++j) acc[j] += static_cast<double>(k + 1) * w[j];

    const QSample sample = draw();
    const double* f = feat.at(sample.s, sample.a);
    double pred = 0.0;
    for (int j = 0; j < feat.dim; ++j) pred += f[j] * w[j];
    const double alpha = 2.0 / (kappa0 * static_cast<double>(k + 2));
    const double coef = 2.0 * alpha * (pred - sample.qhat);
    double norm_sq = 0.0;
    for (int j = 0; j < feat.dim; ++j) {
      w[j] -= coef * f[j];
      norm_sq += w[j] * w[j];
    }
    if (norm_sq > w_cap * w_cap) {
      const double shrink = w_cap / std::sqrt(norm_sq);
      for (int j = 0; j < feat.dim; ++j) w[j] *= shrink;
    }
  }

  RegressionReport out;
  out.w.resize(feat.dim);
  const double norm = 2.0 / (static_cast<double>(steps) * (steps + 1));
  for (int j = 0; j < feat.dim; ++j) out.w[j] = norm * acc[j];
  return out;
}

/* ------------------------------------------------------------------ */
/* Rollout estimators                                                  */
/* ------------------------------------------------------------------ */

namespace detail {

constexpr long kRolloutCap = 10'000'000;

inline int sample_action(const TabularPolicy& pi, int s, Rng& rng) {
  return static_cast<int>(rng.categorical(pi.probs.data() + static_cast<std::size_t>(s) * pi.n_actions,
                                          pi.n_actions));
}

inline int sample_next_state(const Cmdp& mdp, int s, int a, Rng& rng) {
  return static_cast<int>(
      rng.categorical(mdp.transition.data() + mdp.sa(s, a) * mdp.n_states, mdp.n_states));
}

}  // namespace detail

/*
 * Unbiased soft-Q estimate at a pair drawn from the discounted occupancy.
 *
 * Phase 1 draws (s_0,a_0) from nu and keeps executing the policy with
 * probability gamma per step; the accepted pair's marginal is the
 * occupancy d_nu.  Phase 2 scores the accepted pair with its immediate
 * composite value (r + lambda*g + tau*psi)(s_h,a_h), psi = -log pi, then
 * continues the rollout with per-step survival sqrt(gamma), adding
 * gamma^{(k-h)/2} times the composite value at each surviving step: weight
 * times survival is gamma per step, so the tail sums to the exact
 * continuation value in expectation.
 */
inline QSample estimate_q(const Cmdp& mdp, const TabularPolicy& pi, double lambda, double tau,
                          const std::vector<double>& nu, Rng& rng) {
  if (!(mdp.gamma > 0.0)) throw std::invalid_argument("estimate_q: gamma must be positive");
  if (nu.size() != mdp.reward.size())
    throw std::invalid_argument("estimate_q: nu must be a state-action distribution");
  const std::vector<double> f = lagrangian_signal(mdp, lambda);
  const auto composite = [&](int s, int a) {
    double c = f[mdp.sa(s, a)];
    if (tau != 0.0) {
      const double p = pi.prob(s, a);
      if (!(p > 0.0))
        throw std::invalid_argument("estimate_q: policy must be strictly positive when tau > 0");
      c -= tau * std::log(p);
    }
    return c;
  };

  const std::size_t start = rng.categorical(nu);
  int s = static_cast<int>(start) / mdp.n_actions;
  int a = static_cast<int>(start) % mdp.n_actions;
  for (long h = 0;; ++h) {
    if (h >= detail::kRolloutCap) throw std::runtime_error("estimate_q: acceptance cap exceeded");
    if (rng.uniform01() >= mdp.gamma) break;
    s = detail::sample_next_state(mdp, s, a, rng);
    a = detail::sample_action(pi, s, rng);
  }

  QSample out;
  out.s = s;
  out.a = a;
  out.qhat = composite(s, a);

  const double sqrt_gamma = std::sqrt(mdp.gamma);
  double weight = 1.0;
  int cs = s, ca = a;
  for (long k = 0;; ++k) {
    if (k >= detail::kRolloutCap) throw std::runtime_error("estimate_q: rollout cap exceeded");
    if (rng.uniform01() >= sqrt_gamma) break;
    cs = detail::sample_next_state(mdp, cs, ca, rng);
    ca = detail::sample_action(pi, cs, rng);
    weight *= sqrt_gamma;
    out.qhat += weight * composite(cs, ca);
  }
  return out;
}

/*
 * Unbiased value estimate of an arbitrary per-(s,a) signal from one rollout:
 * start at s_0 ~ rho, add the undiscounted signal each step, and stop with
 * probability 1-gamma per step; the geometric horizon realizes the discount.
 */
inline double estimate_v(const Cmdp& mdp, const TabularPolicy& pi, const std::vector<double>& signal,
                         Rng& rng) {
  if (!(mdp.gamma > 0.0)) throw std::invalid_argument("estimate_v: gamma must be positive");
  if (signal.size() != mdp.reward.size())
    throw std::invalid_argument("estimate_v: signal shape mismatch");

  int s = static_cast<int>(rng.categorical(mdp.init_dist));
  double acc = 0.0;
  for (long k = 0;; ++k) {
    if (k >= detail::kRolloutCap) throw std::runtime_error("estimate_v: rollout cap exceeded");
    const int a = detail::sample_action(pi, s, rng);
    acc += signal[mdp.sa(s, a)];
    if (rng.uniform01() >= mdp.gamma) break;
    s = detail::sample_next_state(mdp, s, a, rng);
  }
  return acc;
}

/* ------------------------------------------------------------------ */
/* Inexact mirror-ascent step                                          */
/* ------------------------------------------------------------------ */

/* Exact state-action occupancy distribution d_nu(s,a) (sums to 1) of the
 * chain (s,a) -> (s' ~ P, a' ~ pi), started from (s_0,a_0) ~ nu: the
 * accepted-pair law of the soft-Q estimator, used by the exact-w variant. */
inline std::vector<double> sa_occupancy(const Cmdp& mdp, const TabularPolicy& pi,
                                        const std::vector<double>& nu) {
  const int n = mdp.n_states * mdp.n_actions;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        for (int a2 = 0; a2 < mdp.n_actions; ++a2)
          t(static_cast<int>(mdp.sa(s, a)), static_cast<int>(mdp.sa(s2, a2))) =
              mdp.p(s, a, s2) * pi.prob(s2, a2);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs(i) = (1.0 - mdp.gamma) * nu[i];
  Eigen::MatrixXd a_mat = Eigen::MatrixXd::Identity(n, n) - mdp.gamma * t.transpose();
  Eigen::VectorXd d = a_mat.partialPivLu().solve(rhs);
  return {d.data(), d.data() + n};
}

/* Default sampling start: rho on states, uniform on actions. */
inline std::vector<double> default_nu(const Cmdp& mdp) {
  std::vector<double> nu(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      nu[mdp.sa(s, a)] = mdp.init_dist[s] / static_cast<double>(mdp.n_actions);
  return nu;
}

struct InexactStepResult {
  PrimalDualIterate it;
  RegressionReport regression;
};

namespace detail {

/* Shared mirror-step body: per-state KL ascent along phi(s,.)'w, dual
 * proximal descent along the supplied constraint-value signal. */
inline PrimalDualIterate fa_mirror_step(const FeatureMap& feat, const PrimalDualIterate& it,
                                        const std::vector<double>& w, double v_g,
                                        const RpgPdConfig& cfg) {
  const RestrictedSimplex set(feat.n_actions, cfg.eps0);
  PrimalDualIterate next = it;
  for (int s = 0; s < feat.n_states; ++s)
    next.pi.set_row(s, mwu_step(it.pi.row(s), feat.scores(s, w), cfg.eta, set));
  next.lambda = project_interval((1.0 - cfg.eta * cfg.tau) * it.lambda - cfg.eta * v_g, 0.0,
                                 cfg.lambda_max);
  return next;
}

}  // namespace detail

/*
 * Inexact step with the exact regression: w* is fit under the exact
 * occupancy d_nu of the current policy, and the dual signal is the exact
 * V_g.  Isolates pure approximation bias (no sampling noise); reduces to
 * rpgpd_step under indicator features.
 */
inline InexactStepResult inexact_rpgpd_step(const Cmdp& mdp, const FeatureMap& feat,
                                            const PrimalDualIterate& it, const RpgPdConfig& cfg,
                                            const std::vector<double>& nu) {
  cfg.validate();
  InexactStepResult out;
  out.regression = exact_wstar(mdp, it.pi, it.lambda, cfg.tau, feat, sa_occupancy(mdp, it.pi, nu));
  out.it = detail::fa_mirror_step(feat, it, out.regression.w, constraint_value(mdp, it.pi), cfg);
  return out;
}

struct SampleConfig {
  int sgd_steps = 0;     /* K: labeled draws consumed by the inner regression */
  double w_cap = 0.0;    /* W: regression ball radius */
  double kappa0 = 1e-3;  /* assumed coverage floor on Sigma_nu's spectrum */
};

/*
 * Fully sample-based step: the regression consumes `sgd_steps` fresh
 * rollout-estimated labels, and the dual update uses a single rollout
 * estimate of V_g.  All randomness flows through the supplied generator.
 */
inline InexactStepResult sample_rpgpd_step(const Cmdp& mdp, const FeatureMap& feat,
                                           const PrimalDualIterate& it, const RpgPdConfig& cfg,
                                           const std::vector<double>& nu, const SampleConfig& sc,
                                           Rng& rng) {
  cfg.validate();
  InexactStepResult out;
  out.regression = sgd_w(
      feat, [&] { return estimate_q(mdp, it.pi, it.lambda, cfg.tau, nu, rng); }, sc.w_cap,
      sc.kappa0, sc.sgd_steps);
  const double v_g_hat = estimate_v(mdp, it.pi, mdp.g_table(), rng);
  out.it = detail::fa_mirror_step(feat, it, out.regression.w, v_g_hat, cfg);
  return out;
}

/* ------------------------------------------------------------------ */
/* Approximation diagnostics                                           */
/* ------------------------------------------------------------------ */

/* Feature second moment Sigma = E_(s,a)~dist[phi phi']. */
inline Eigen::MatrixXd feature_sigma(const FeatureMap& feat, const std::vector<double>& dist) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(feat.dim, feat.dim);
  for (int s = 0; s < feat.n_states; ++s)
    for (int a = 0; a < feat.n_actions; ++a) {
      const std::size_t i = static_cast<std::size_t>(s) * feat.n_actions + a;
      if (dist[i] == 0.0) continue;
      Eigen::Map<const Eigen::VectorXd> f(feat.at(s, a), feat.dim);
      sigma += dist[i] * f * f.transpose();
    }
  return sigma;
}

/*
 * Relative condition number: the largest generalized Rayleigh quotient
 * v'Sigma_ref v / v'Sigma v.  Directions where Sigma vanishes but Sigma_ref
 * does not make the ratio infinite; directions where both vanish are
 * quotiented out.  Computed through Sigma's eigendecomposition with a
 * relative rank cutoff.
 */
inline double kappa_from_sigmas(const Eigen::MatrixXd& sigma_ref, const Eigen::MatrixXd& sigma) {
  const int d = static_cast<int>(sigma.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  const Eigen::VectorXd evals = es.eigenvalues();
  const Eigen::MatrixXd evecs = es.eigenvectors();
  const double cutoff = 1e-12 * std::max(1.0, evals.cwiseAbs().maxCoeff());

  std::vector<int> keep;
  for (int i = 0; i < d; ++i) {
    if (evals(i) > cutoff) {
      keep.push_back(i);
    } else {
      /* null direction of Sigma: any reference mass there is uncovered */
      const Eigen::VectorXd v = evecs.col(i);
      if (v.dot(sigma_ref * v) > 1e-12) return std::numeric_limits<double>::infinity();
    }
  }
  if (keep.empty()) return 1.0; /* both moments vanish: nothing to cover */

  Eigen::MatrixXd basis(d, static_cast<int>(keep.size()));
  Eigen::VectorXd inv_sqrt(static_cast<int>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    basis.col(static_cast<int>(j)) = evecs.col(keep[j]);
    inv_sqrt(static_cast<int>(j)) = 1.0 / std::sqrt(evals(keep[j]));
  }
  const Eigen::MatrixXd white = basis * inv_sqrt.asDiagonal();
  const Eigen::MatrixXd m = white.transpose() * sigma_ref * white;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m);
  return std::max(em.eigenvalues().maxCoeff(), 0.0);
}

struct FaDiagnostics {
  Eigen::MatrixXd sigma_nu;
  double kappa_nu = 0.0;  /* coverage of ref_dist by dist; +inf when uncovered */
  double eps_bias = 0.0;  /* transfer error: fit under dist, measured under ref_dist */
};

inline FaDiagnostics fa_diagnostics(const Cmdp& mdp, const TabularPolicy& pi, double lambda,
                                    double tau, const FeatureMap& feat,
                                    const std::vector<double>& dist,
                                    const std::vector<double>& ref_dist) {
  FaDiagnostics out;
  out.sigma_nu = feature_sigma(feat, dist);
  out.kappa_nu = kappa_from_sigmas(feature_sigma(feat, ref_dist), out.sigma_nu);
  const RegressionReport fit = exact_wstar(mdp, pi, lambda, tau, feat, dist);
  const std::vector<double> q = soft_q(mdp, pi, lambda, tau);
  out.eps_bias = regression_objective(feat, fit.w, q, ref_dist);
  return out;
}

}  // namespace cmdplab
