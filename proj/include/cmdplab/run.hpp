#pragma once

/*
 * Run drivers: iterate a solver, evaluate each iterate exactly, and emit
 * trace rows in the fixed CSV schema.  One row per completed step (row t
 * describes the iterate after t steps; a zero-iteration run yields a
 * header-only trace).  Metrics with no reference in the supplied context
 * stay NaN.  Non-finite values abort the run: they indicate a diverged
 * configuration, and silently logging them would poison downstream fits.
 */

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/fa.hpp"
#include "cmdplab/metrics.hpp"
#include "cmdplab/optimistic.hpp"
#include "cmdplab/rpgpd.hpp"
#include "cmdplab/trace.hpp"

namespace cmdplab {

struct RunAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline TraceRow evaluated_row(long iter, const Cmdp& mdp, const TabularPolicy& pi, double lambda,
                              const DiagnosticsContext& ctx) {
  const Gaps gp = gaps(mdp, pi, ctx);
  if (!std::isfinite(gp.v_r) || !std::isfinite(gp.v_g) || !std::isfinite(lambda))
    throw RunAbort("solver diverged: non-finite values at iteration " + std::to_string(iter));
  TraceRow row;
  row.iter = iter;
  row.v_r = gp.v_r;
  row.v_g = gp.v_g;
  row.lambda = lambda;
  row.opt_gap = gp.opt_gap;
  row.violation = gp.violation;
  return row;
}

inline void warn_stepsize(const char* algo, double eta, double ceiling) {
  if (ceiling > 0.0 && eta > ceiling)
    std::fprintf(stderr, "[%s] warning: eta = %g exceeds the guaranteed-stepsize ceiling %g\n",
                 algo, eta, ceiling);
}

}  // namespace detail

/*
 * Regularized mirror-ascent run.  When the context carries a regularized
 * saddle reference the phi column tracks the weighted-KL + squared-dual
 * distance to it; the reference visitation is computed once.
 */
inline SolverTrace rpgpd_run(const Cmdp& mdp, PrimalDualIterate it, const RpgPdConfig& cfg,
                             long iters, const DiagnosticsContext& ctx) {
  cfg.validate();
  if (ctx.cert.strict())
    detail::warn_stepsize("rpgpd", cfg.eta,
                          cfg.stepsize_ceiling(mdp.gamma, ctx.cert.xi, mdp.n_actions));

  std::vector<double> d_ref;
  if (ctx.saddle) d_ref = visitation(mdp, ctx.saddle->pi_tau);

  SolverTrace trace;
  for (long t = 1; t <= iters; ++t) {
    it = rpgpd_step(mdp, it, cfg);
    TraceRow row = detail::evaluated_row(t, mdp, it.pi, it.lambda, ctx);
    if (ctx.saddle) row.phi = phi_with_weights(it, *ctx.saddle, d_ref, mdp.gamma);
    trace.push(row);
  }
  return trace;
}

enum class OptimisticKind { projected, mwu };

/*
 * Two-sequence optimistic run (projected Q-ascent or multiplicative-weights
 * flavor).  With a certified-unique LP optimum and a dual bracket, row t
 * carries Theta_t and the preceding decrement zeta_{t-1} (both produced by
 * the consecutive-record formula), and the extra column `saddle_dist` holds
 * the anchor pair's distance to the saddle set.
 */
inline SolverTrace optimistic_run(const Cmdp& mdp, OptimisticIterate it, double eta,
                                  double lambda_max, long iters, const DiagnosticsContext& ctx,
                                  OptimisticKind kind) {
  const bool have_refs = ctx.lp && ctx.lp->unique_flag && ctx.dual;
  std::vector<double> d_star;
  if (have_refs) d_star = visitation(mdp, ctx.lp->pi_star);

  SolverTrace trace;
  for (long t = 1; t <= iters; ++t) {
    const OptimisticIterate prev = it;
    it = (kind == OptimisticKind::projected) ? opgpd_step(mdp, it, eta, lambda_max)
                                             : omwupd_step(mdp, it, eta, lambda_max);
    TraceRow row = detail::evaluated_row(t, mdp, it.pi, it.lambda, ctx);
    if (have_refs) {
      const ThetaZeta tz = theta_zeta_with_refs(prev, it, ctx.lp->pi_star, ctx.dual->lo,
                                                ctx.dual->hi, d_star, mdp.gamma);
      row.theta = tz.theta;
      row.zeta = tz.zeta;
      trace.push(row);
      trace.push_extra("saddle_dist",
                       saddle_distance_with_refs(it, ctx.lp->pi_star, ctx.dual->lo, ctx.dual->hi,
                                                 d_star, mdp.gamma));
    } else {
      trace.push(row);
    }
  }
  return trace;
}

inline SolverTrace opgpd_run(const Cmdp& mdp, const OptimisticIterate& init, double eta,
                             double lambda_max, long iters, const DiagnosticsContext& ctx) {
  return optimistic_run(mdp, init, eta, lambda_max, iters, ctx, OptimisticKind::projected);
}

inline SolverTrace omwupd_run(const Cmdp& mdp, const OptimisticIterate& init, double eta,
                              double lambda_max, long iters, const DiagnosticsContext& ctx) {
  return optimistic_run(mdp, init, eta, lambda_max, iters, ctx, OptimisticKind::mwu);
}

/*
 * Occupancy-space optimistic run.  Rows evaluate the policy recovered from
 * the current occupancy candidate by row normalization.  Extras:
 * `flow_residual` (max-norm Bellman-flow infeasibility of q_t) and, with LP
 * references, `dist_proxy` = sum_s ||pi_t(.|s) - pi*(.|s)||^2 plus the
 * squared dual distance to the optimal-multiplier bracket.
 */
inline SolverTrace opd_run(const Cmdp& mdp, OpdIterate it, const OpdConfig& cfg, long iters,
                           const DiagnosticsContext& ctx) {
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("opd_run: eta must be positive");
  const bool have_refs = ctx.lp && ctx.lp->unique_flag && ctx.dual;

  SolverTrace trace;
  for (long t = 1; t <= iters; ++t) {
    it = opd_step(mdp, it, cfg);
    const RecoveredPolicy rec = opd_policy(mdp, it.q);
    TraceRow row = detail::evaluated_row(t, mdp, rec.pi, it.lambda, ctx);
    trace.push(row);
    trace.push_extra("flow_residual", flow_residual(mdp, it.q));
    if (have_refs) {
      double dist = 0.0;
      for (int s = 0; s < mdp.n_states; ++s)
        dist += detail::row_sq_dist(rec.pi, ctx.lp->pi_star, s);
      const double dl = it.lambda - project_interval(it.lambda, ctx.dual->lo, ctx.dual->hi);
      trace.push_extra("dist_proxy", dist + dl * dl);
    }
  }
  return trace;
}

/* Approximate-gradient run with the exact per-step regression (pure
 * approximation bias, no sampling noise). */
inline SolverTrace fa_run(const Cmdp& mdp, const FeatureMap& feat, PrimalDualIterate it,
                          const RpgPdConfig& cfg, const std::vector<double>& nu, long iters,
                          const DiagnosticsContext& ctx) {
  cfg.validate();
  std::vector<double> d_ref;
  if (ctx.saddle) d_ref = visitation(mdp, ctx.saddle->pi_tau);

  SolverTrace trace;
  for (long t = 1; t <= iters; ++t) {
    it = inexact_rpgpd_step(mdp, feat, it, cfg, nu).it;
    TraceRow row = detail::evaluated_row(t, mdp, it.pi, it.lambda, ctx);
    if (ctx.saddle) row.phi = phi_with_weights(it, *ctx.saddle, d_ref, mdp.gamma);
    trace.push(row);
  }
  return trace;
}

/* Fully sample-based run; evaluation of each iterate stays exact, so the
 * trace is deterministic for a fixed generator seed. */
inline SolverTrace sample_run(const Cmdp& mdp, const FeatureMap& feat, PrimalDualIterate it,
                              const RpgPdConfig& cfg, const SampleConfig& sc,
                              const std::vector<double>& nu, long iters,
                              const DiagnosticsContext& ctx, Rng& rng) {
  cfg.validate();
  std::vector<double> d_ref;
  if (ctx.saddle) d_ref = visitation(mdp, ctx.saddle->pi_tau);

  SolverTrace trace;
  for (long t = 1; t <= iters; ++t) {
    it = sample_rpgpd_step(mdp, feat, it, cfg, nu, sc, rng).it;
    TraceRow row = detail::evaluated_row(t, mdp, it.pi, it.lambda, ctx);
    if (ctx.saddle) row.phi = phi_with_weights(it, *ctx.saddle, d_ref, mdp.gamma);
    trace.push(row);
  }
  return trace;
}

}  // namespace cmdplab
