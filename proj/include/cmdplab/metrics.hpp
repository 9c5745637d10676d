#pragma once

/*
 * Convergence diagnostics.
 *
 * Everything here measures an iterate against a reference computed by the
 * oracle layer: the regularized saddle (for the mirror-ascent method), the
 * occupancy LP optimum and the optimal-multiplier interval (for the
 * optimistic methods), or nothing at all (trace post-processing).  A metric
 * whose reference is absent reports "unavailable" (std::nullopt / NaN),
 * never a fabricated zero.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/constants.hpp"
#include "cmdplab/geometry.hpp"
#include "cmdplab/optimistic.hpp"
#include "cmdplab/oracle.hpp"
#include "cmdplab/rng.hpp"
#include "cmdplab/rpgpd.hpp"
#include "cmdplab/trace.hpp"

namespace cmdplab {

/* References available to the diagnostics; each solver run fills what its
 * problem admits.  `dual` brackets the optimal-multiplier interval, onto
 * which the dual distance terms clamp. */
struct DiagnosticsContext {
  FeasibilityCert cert;
  std::optional<LpSolution> lp;
  std::optional<SaddleRef> saddle;
  std::optional<DualScanResult> dual;
  std::optional<double> kappa_rho;  /* >= 1 when present */
};

/* ------------------------------------------------------------------ */
/* Distance to the regularized saddle                                  */
/* ------------------------------------------------------------------ */

/*
 * Phi = (1/(1-gamma)) sum_s d_ref(s) * KL(pi_ref(.|s), pi_t(.|s))
 *       + (lambda_ref - lambda_t)^2 / 2,
 * with d_ref the discounted visitation of the reference policy.  Infinite
 * KL (iterate vanishing on the reference support) propagates as +inf.
 */
inline double phi_with_weights(const PrimalDualIterate& it, const SaddleRef& saddle,
                               const std::vector<double>& d_ref, double gamma) {
  double weighted_kl = 0.0;
  for (int s = 0; s < it.pi.n_states; ++s) {
    if (d_ref[s] == 0.0) continue;
    const double kl = kl_div(saddle.pi_tau.row(s), it.pi.row(s));
    if (std::isinf(kl)) return std::numeric_limits<double>::infinity();
    weighted_kl += d_ref[s] * kl;
  }
  const double dl = saddle.lambda_tau - it.lambda;
  return weighted_kl / (1.0 - gamma) + 0.5 * dl * dl;
}

inline double phi(const Cmdp& mdp, const PrimalDualIterate& it, const SaddleRef& saddle) {
  return phi_with_weights(it, saddle, visitation(mdp, saddle.pi_tau), mdp.gamma);
}

/* ------------------------------------------------------------------ */
/* Optimistic-method distances                                         */
/* ------------------------------------------------------------------ */

struct ThetaZeta {
  double theta = 0.0;
  double zeta = 0.0;
};

namespace detail {

inline double row_sq_dist(const TabularPolicy& x, const TabularPolicy& y, int s) {
  double acc = 0.0;
  for (int a = 0; a < x.n_actions; ++a) {
    const double d = x.prob(s, a) - y.prob(s, a);
    acc += d * d;
  }
  return acc;
}

/* d*-weighted sum of squared row distances. */
inline double weighted_sq_dist(const TabularPolicy& x, const TabularPolicy& y,
                               const std::vector<double>& d_star) {
  double acc = 0.0;
  for (int s = 0; s < x.n_states; ++s) acc += d_star[s] * row_sq_dist(x, y, s);
  return acc;
}

}  // namespace detail

/*
 * The coupled potential and its decrement certificate for the two-sequence
 * optimistic scheme, between consecutive records prev = (pi_t, pi_hat_t,
 * lambda_t, lambda_hat_t) and cur = the t+1 record:
 *
 *   Theta_{t+1} = (1/(2(1-gamma))) sum_s d*(s) ||pi_hat_{t+1} - P_opt(pi_hat_{t+1})||^2
 *               + (lambda_hat_{t+1} - P_interval(lambda_hat_{t+1}))^2 / 2
 *               + (1/(16(1-gamma))) sum_s d*(s) ||pi_hat_{t+1} - pi_t||^2
 *               + (lambda_hat_{t+1} - lambda_t)^2 / 16,
 *
 *   zeta_t      = (1/(2(1-gamma))) sum_s d*(s) ||pi_hat_{t+1} - pi_t||^2
 *               + (lambda_hat_{t+1} - lambda_t)^2 / 2
 *               + (1/(2(1-gamma))) sum_s d*(s) ||pi_t - pi_hat_t||^2
 *               + (lambda_t - lambda_hat_t)^2 / 2,
 *
 * where d* is the visitation of the LP-optimal policy, P_opt projects onto
 * the (singleton) optimal policy set, and the dual projection clamps onto
 * the optimal-multiplier bracket.  The scheme's one-step law is the
 * supermartingale-style decrement Theta_{t+1} <= Theta_t - (7/16) zeta_t.
 */
inline ThetaZeta theta_zeta_with_refs(const OptimisticIterate& prev, const OptimisticIterate& cur,
                                      const TabularPolicy& pi_star, double lambda_lo,
                                      double lambda_hi, const std::vector<double>& d_star,
                                      double gamma) {
  const double w_half = 0.5 / (1.0 - gamma);
  const double w_sixteenth = 1.0 / (16.0 * (1.0 - gamma));

  const double opt_pi = detail::weighted_sq_dist(cur.pi_hat, pi_star, d_star);
  const double dl_opt = cur.lambda_hat - project_interval(cur.lambda_hat, lambda_lo, lambda_hi);
  const double lag_pi = detail::weighted_sq_dist(cur.pi_hat, prev.pi, d_star);
  const double dl_lag = cur.lambda_hat - prev.lambda;
  const double gap_pi = detail::weighted_sq_dist(prev.pi, prev.pi_hat, d_star);
  const double dl_gap = prev.lambda - prev.lambda_hat;

  ThetaZeta out;
  out.theta = w_half * opt_pi + 0.5 * dl_opt * dl_opt + w_sixteenth * lag_pi +
              dl_lag * dl_lag / 16.0;
  out.zeta = w_half * lag_pi + 0.5 * dl_lag * dl_lag + w_half * gap_pi + 0.5 * dl_gap * dl_gap;
  return out;
}

/* Context-checked wrapper: needs a certified-unique LP optimum and a dual
 * bracket; with multiplicity the projection target is ambiguous, so the
 * metric reports unavailable instead of guessing. */
inline std::optional<ThetaZeta> theta_zeta(const Cmdp& mdp, const OptimisticIterate& prev,
                                           const OptimisticIterate& cur,
                                           const DiagnosticsContext& ctx) {
  if (!ctx.lp || !ctx.lp->unique_flag || !ctx.dual) return std::nullopt;
  const std::vector<double> d_star = visitation(mdp, ctx.lp->pi_star);
  return theta_zeta_with_refs(prev, cur, ctx.lp->pi_star, ctx.dual->lo, ctx.dual->hi, d_star,
                              mdp.gamma);
}

/*
 * Plain distance of the anchor pair (pi_hat_t, lambda_hat_t) to the saddle
 * set: the d*-weighted squared policy distance over 2(1-gamma) plus half the
 * squared dual distance to the optimal-multiplier bracket.
 */
inline double saddle_distance_with_refs(const OptimisticIterate& it, const TabularPolicy& pi_star,
                                        double lambda_lo, double lambda_hi,
                                        const std::vector<double>& d_star, double gamma) {
  const double pi_term =
      detail::weighted_sq_dist(it.pi_hat, pi_star, d_star) * 0.5 / (1.0 - gamma);
  const double dl = it.lambda_hat - project_interval(it.lambda_hat, lambda_lo, lambda_hi);
  return pi_term + 0.5 * dl * dl;
}

inline std::optional<double> saddle_distance(const Cmdp& mdp, const OptimisticIterate& it,
                                             const DiagnosticsContext& ctx) {
  if (!ctx.lp || !ctx.lp->unique_flag || !ctx.dual) return std::nullopt;
  const std::vector<double> d_star = visitation(mdp, ctx.lp->pi_star);
  return saddle_distance_with_refs(it, ctx.lp->pi_star, ctx.dual->lo, ctx.dual->hi, d_star,
                                   mdp.gamma);
}

/* ------------------------------------------------------------------ */
/* Optimality gap and constraint violation                             */
/* ------------------------------------------------------------------ */

struct Gaps {
  double v_r = 0.0;
  double v_g = 0.0;
  double opt_gap = std::nan("");  /* V_r^{pi*}(rho) - V_r^pi(rho); NaN without an LP reference */
  double violation = 0.0;         /* max(0, -V_g^pi(rho)) */
};

inline Gaps gaps(const Cmdp& mdp, const TabularPolicy& pi, const DiagnosticsContext& ctx) {
  Gaps out;
  out.v_r = rho_dot(mdp, evaluate_v(mdp, pi, mdp.reward));
  out.v_g = rho_dot(mdp, evaluate_v(mdp, pi, mdp.g_table()));
  out.violation = std::max(0.0, -out.v_g);
  if (ctx.lp) out.opt_gap = ctx.lp->value - out.v_r;
  return out;
}

/* ------------------------------------------------------------------ */
/* Distribution-mismatch coefficient                                   */
/* ------------------------------------------------------------------ */

struct KappaRhoEstimate {
  double lower_bound = 1.0;  /* max over swept policies of ||d_rho^pi / rho||_inf */
  double cap = 0.0;          /* the universal upper bound 1/rho_min */
};

namespace detail {

inline double visitation_ratio(const Cmdp& mdp, const TabularPolicy& pi) {
  const std::vector<double> d = visitation(mdp, pi);
  double worst = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) worst = std::max(worst, d[s] / mdp.init_dist[s]);
  return worst;
}

}  // namespace detail

/*
 * Lower-bounds sup_pi ||d_rho^pi / rho||_inf by sweeping policies: every
 * deterministic policy when |A|^|S| <= 4096 (the sup of a linear-fractional
 * objective is attained at a vertex, so the exhaustive sweep is usually
 * exact), otherwise `sample_policies` random deterministic ones, plus
 * `sample_policies` random stochastic ones.  The cap 1/rho_min is reported
 * alongside; rho_min = 0 makes the coefficient infinite (unavailable).
 */
inline std::optional<KappaRhoEstimate> kappa_rho(const Cmdp& mdp, int sample_policies, Rng& rng) {
  const int S = mdp.n_states, A = mdp.n_actions;
  double rho_min = std::numeric_limits<double>::infinity();
  for (double r : mdp.init_dist) rho_min = std::min(rho_min, r);
  if (!(rho_min > 0.0)) return std::nullopt;

  KappaRhoEstimate out;
  out.cap = 1.0 / rho_min;

  TabularPolicy pi = TabularPolicy::uniform(S, A);
  const auto set_deterministic = [&](const std::vector<int>& choice) {
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) pi.prob(s, a) = (a == choice[s]) ? 1.0 : 0.0;
  };

  double n_vertices = 1.0;
  for (int s = 0; s < S; ++s) n_vertices *= static_cast<double>(A);
  if (n_vertices <= 4096.0) {
    std::vector<int> choice(S, 0);
    for (;;) {
      set_deterministic(choice);
      out.lower_bound = std::max(out.lower_bound, detail::visitation_ratio(mdp, pi));
      int s = S - 1;
      while (s >= 0) {
        if (++choice[s] < A) break;
        choice[s] = 0;
        --s;
      }
      if (s < 0) break;
    }
  } else {
    std::vector<int> choice(S);
    for (int k = 0; k < sample_policies; ++k) {
      for (int s = 0; s < S; ++s) choice[s] = static_cast<int>(rng.next_u64() % A);
      set_deterministic(choice);
      out.lower_bound = std::max(out.lower_bound, detail::visitation_ratio(mdp, pi));
    }
  }

  for (int k = 0; k < sample_policies; ++k) {
    for (int s = 0; s < S; ++s) {
      std::vector<double> row(A);
      double total = 0.0;
      for (int a = 0; a < A; ++a) {
        row[a] = rng.uniform01() + 1e-12;
        total += row[a];
      }
      for (int a = 0; a < A; ++a) row[a] /= total;
      pi.set_row(s, row);
    }
    out.lower_bound = std::max(out.lower_bound, detail::visitation_ratio(mdp, pi));
  }
  return out;
}

/* ------------------------------------------------------------------ */
/* Trace post-processing                                               */
/* ------------------------------------------------------------------ */

/* Sign changes of the discrete derivative: zero differences and non-finite
 * samples are skipped rather than counted as direction changes.  Steps no
 * larger than `dead_band` are treated as numerical standstill — once a
 * solver has converged, consecutive exact evaluations differ only in the
 * last few ulps, and counting that jitter would swamp the real cycling the
 * metric is after. */
inline long oscillation_count(const std::vector<double>& series, double dead_band = 1e-12) {
  long count = 0;
  int last_sign = 0;
  bool have_prev = false;
  double prev = 0.0;
  for (double v : series) {
    if (!std::isfinite(v)) continue;
    if (have_prev) {
      const double diff = v - prev;
      if (std::fabs(diff) > dead_band) {
        const int sign = diff > 0.0 ? 1 : -1;
        if (last_sign != 0 && sign != last_sign) ++count;
        last_sign = sign;
      }
    }
    prev = v;
    have_prev = true;
  }
  return count;
}

inline long oscillation_count(const SolverTrace& trace, const std::string& column,
                              double dead_band = 1e-12) {
  return oscillation_count(trace.column(column), dead_band);
}

struct TailRate {
  double factor = 1.0;     /* exp(least-squares slope of log values) */
  double r_squared = 0.0;  /* fit quality; 1 by convention for a constant tail */
  long points = 0;         /* usable (positive, finite) samples in the window */
};

/*
 * Geometric contraction factor of the trailing `window` entries: regress
 * log(value) on the iteration index and exponentiate the slope.  Nonpositive
 * or non-finite entries carry no log and are left out; a constant tail has
 * zero variance on both axes and reports factor 1 with r^2 = 1.
 */
inline TailRate tail_rate(const std::vector<double>& series, std::size_t window) {
  const std::size_t n = series.size();
  const std::size_t begin = window >= n ? 0 : n - window;

  std::vector<double> xs, ys;
  for (std::size_t i = begin; i < n; ++i) {
    const double v = series[i];
    if (!(v > 0.0) || !std::isfinite(v)) continue;
    xs.push_back(static_cast<double>(i));
    ys.push_back(std::log(v));
  }

  TailRate out;
  out.points = static_cast<long>(xs.size());
  if (xs.size() < 2) return out;

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (syy == 0.0) {
    out.factor = 1.0;
    out.r_squared = 1.0;
    return out;
  }
  const double slope = sxy / sxx;
  out.factor = std::exp(slope);
  out.r_squared = (sxy * sxy) / (sxx * syy);
  return out;
}

inline TailRate tail_rate(const SolverTrace& trace, const std::string& column,
                          std::size_t window) {
  return tail_rate(trace.column(column), window);
}

}  // namespace cmdplab
