/*
 * Convergence diagnostics: saddle potentials, optimistic potentials and
 * their trace semantics, optimality/violation gaps, the distribution
 * mismatch coefficient, oscillation counting, tail-rate fitting, and the
 * CSV schema contract.
 */

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <vector>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/gen.hpp"
#include "cmdplab/metrics.hpp"
#include "cmdplab/optimistic.hpp"
#include "cmdplab/oracle.hpp"
#include "cmdplab/rng.hpp"
#include "cmdplab/rpgpd.hpp"
#include "cmdplab/run.hpp"
#include "cmdplab/trace.hpp"
#include "fixtures.hpp"

using cmdplab::Cmdp;
using cmdplab::OptimisticIterate;
using cmdplab::PrimalDualIterate;
using cmdplab::TabularPolicy;

namespace {

TabularPolicy one_state_rows(double p0) {
  TabularPolicy pi;
  pi.n_states = 1;
  pi.n_actions = 2;
  pi.probs = {p0, 1.0 - p0};
  return pi;
}

}  // namespace

TEST_CASE("saddle potential phi") {
  cmdplab::SaddleRef sad;
  sad.pi_tau = one_state_rows(0.5);
  sad.lambda_tau = 0.3;
  sad.tau = 0.1;
  sad.residual = 0.0;
  const std::vector<double> d_ref = {1.0};

  SECTION("zero at the reference itself") {
    PrimalDualIterate it;
    it.pi = one_state_rows(0.5);
    it.lambda = 0.3;
    CHECK(cmdplab::phi_with_weights(it, sad, d_ref, 0.0) == 0.0);
  }
  SECTION("pure dual displacement contributes half its square") {
    PrimalDualIterate it;
    it.pi = one_state_rows(0.5);
    it.lambda = 1.3;
    CHECK(cmdplab::phi_with_weights(it, sad, d_ref, 0.0) == Catch::Approx(0.5).margin(1e-15));
  }
  SECTION("pure policy displacement is the weighted KL") {
    PrimalDualIterate it;
    it.pi = one_state_rows(0.75);
    it.lambda = 0.3;
    /* KL((1/2,1/2), (3/4,1/4)) = (1/2) log(4/3) */
    CHECK(cmdplab::phi_with_weights(it, sad, d_ref, 0.0) ==
          Catch::Approx(0.5 * std::log(4.0 / 3.0)).margin(1e-12));
  }
  SECTION("iterate off the reference support is infinitely far") {
    PrimalDualIterate it;
    it.pi = one_state_rows(1.0);
    it.lambda = 0.3;
    CHECK(std::isinf(cmdplab::phi_with_weights(it, sad, d_ref, 0.0)));
  }
  SECTION("model wrapper weighs by the reference visitation") {
    const Cmdp m = fixtures::lr_mdp();
    const cmdplab::SaddleRef s8 = cmdplab::regularized_saddle(m, 0.08, 1e-6);
    PrimalDualIterate it = PrimalDualIterate::start(m);
    it.lambda = 0.9;
    CHECK(cmdplab::phi(m, it, s8) ==
          cmdplab::phi_with_weights(it, s8, cmdplab::visitation(m, s8.pi_tau), m.gamma));
  }
}

TEST_CASE("optimistic potential and decrement pair") {
  const Cmdp m = fixtures::lr_mdp();
  const cmdplab::LpSolution lp = cmdplab::solve_lp(m);
  const cmdplab::FeasibilityCert cert = cmdplab::certify_feasibility(m);
  const cmdplab::DualScanResult dual = cmdplab::dual_scan(m, cert, 1e-5);
  const std::vector<double> d_star = cmdplab::visitation(m, lp.pi_star);

  SECTION("vanishes when both records sit at the saddle") {
    OptimisticIterate at;
    at.pi = at.pi_hat = lp.pi_star;
    at.lambda = at.lambda_hat = dual.lambda_star;
    const cmdplab::ThetaZeta tz =
        cmdplab::theta_zeta_with_refs(at, at, lp.pi_star, dual.lo, dual.hi, d_star, m.gamma);
    CHECK(tz.theta <= 1e-12);
    CHECK(tz.zeta <= 1e-12);
  }

  SECTION("a unit dual offset alone scores one half") {
    OptimisticIterate prev, cur;
    prev.pi = prev.pi_hat = lp.pi_star;
    cur.pi = cur.pi_hat = lp.pi_star;
    cur.lambda_hat = dual.lo - 1.0; /* distance one below the bracket */
    prev.lambda = cur.lambda_hat;   /* kills the lag term */
    prev.lambda_hat = prev.lambda;
    cur.lambda = cur.lambda_hat;
    const cmdplab::ThetaZeta tz =
        cmdplab::theta_zeta_with_refs(prev, cur, lp.pi_star, dual.lo, dual.hi, d_star, m.gamma);
    CHECK(tz.theta == Catch::Approx(0.5).margin(1e-12));
    CHECK(tz.zeta == Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("agrees with an independent transcription of the formula") {
    OptimisticIterate prev = OptimisticIterate::start(m);
    OptimisticIterate cur = cmdplab::opgpd_step(m, prev, 0.1, cert.lambda_max);
    for (int t = 0; t < 100; ++t) {
      const cmdplab::ThetaZeta lib =
          cmdplab::theta_zeta_with_refs(prev, cur, lp.pi_star, dual.lo, dual.hi, d_star, m.gamma);

      const double w_half = 0.5 / (1.0 - m.gamma);
      const double w_16 = 1.0 / (16.0 * (1.0 - m.gamma));
      auto wdist = [&](const TabularPolicy& x, const TabularPolicy& y) {
        double acc = 0.0;
        for (int s = 0; s < m.n_states; ++s) {
          double row = 0.0;
          for (int a = 0; a < m.n_actions; ++a) {
            const double d = x.prob(s, a) - y.prob(s, a);
            row += d * d;
          }
          acc += d_star[s] * row;
        }
        return acc;
      };
      const double clamp =
          std::min(std::max(cur.lambda_hat, dual.lo), dual.hi);
      const double a1 = cur.lambda_hat - clamp;
      const double a2 = cur.lambda_hat - prev.lambda;
      const double a3 = prev.lambda - prev.lambda_hat;
      const double theta = w_half * wdist(cur.pi_hat, lp.pi_star) + 0.5 * a1 * a1 +
                           w_16 * wdist(cur.pi_hat, prev.pi) + a2 * a2 / 16.0;
      const double zeta = w_half * wdist(cur.pi_hat, prev.pi) + 0.5 * a2 * a2 +
                          w_half * wdist(prev.pi, prev.pi_hat) + 0.5 * a3 * a3;
      CHECK(lib.theta == Catch::Approx(theta).margin(1e-12));
      CHECK(lib.zeta == Catch::Approx(zeta).margin(1e-12));
      CHECK(lib.theta >= 0.0);
      CHECK(lib.zeta >= 0.0);

      prev = cur;
      cur = cmdplab::opgpd_step(m, cur, 0.1, cert.lambda_max);
    }
  }

  SECTION("context wrapper needs a unique optimum and a dual bracket") {
    const OptimisticIterate it = OptimisticIterate::start(m);
    cmdplab::DiagnosticsContext ctx;
    ctx.cert = cert;
    CHECK_FALSE(cmdplab::theta_zeta(m, it, it, ctx).has_value());
    CHECK_FALSE(cmdplab::saddle_distance(m, it, ctx).has_value());
    ctx.lp = lp;
    CHECK_FALSE(cmdplab::theta_zeta(m, it, it, ctx).has_value());
    ctx.dual = dual;
    REQUIRE(cmdplab::theta_zeta(m, it, it, ctx).has_value());
    REQUIRE(cmdplab::saddle_distance(m, it, ctx).has_value());
  }

  SECTION("run rows align theta with the new record and zeta with the step") {
    cmdplab::DiagnosticsContext ctx;
    ctx.cert = cert;
    ctx.lp = lp;
    ctx.dual = dual;
    const cmdplab::SolverTrace tr =
        cmdplab::opgpd_run(m, OptimisticIterate::start(m), 0.1, cert.lambda_max, 50, ctx);
    OptimisticIterate prev = OptimisticIterate::start(m);
    for (std::size_t t = 0; t < 50; ++t) {
      const OptimisticIterate cur = cmdplab::opgpd_step(m, prev, 0.1, cert.lambda_max);
      const cmdplab::ThetaZeta tz = *cmdplab::theta_zeta(m, prev, cur, ctx);
      CHECK(tr.column("theta")[t] == tz.theta);
      CHECK(tr.column("zeta")[t] == tz.zeta);
      CHECK(tr.column("saddle_dist")[t] == *cmdplab::saddle_distance(m, cur, ctx));
      prev = cur;
    }
  }

  SECTION("saddle distance is zero exactly on the saddle set") {
    OptimisticIterate at;
    at.pi = at.pi_hat = lp.pi_star;
    at.lambda = at.lambda_hat = 0.5 * (dual.lo + dual.hi);
    CHECK(cmdplab::saddle_distance_with_refs(at, lp.pi_star, dual.lo, dual.hi, d_star,
                                             m.gamma) == 0.0);
  }
}

TEST_CASE("gaps against the LP reference") {
  const Cmdp m = fixtures::lr_mdp();
  cmdplab::DiagnosticsContext ctx;
  ctx.cert = cmdplab::certify_feasibility(m);

  SECTION("optimality gap is unavailable without the LP") {
    const cmdplab::Gaps g = cmdplab::gaps(m, fixtures::lr_policy(1.0), ctx);
    CHECK(std::isnan(g.opt_gap));
    CHECK(g.v_g == Catch::Approx(8.0 / 27.0).margin(1e-12));
    CHECK(g.violation == 0.0);
  }

  ctx.lp = cmdplab::solve_lp(m);

  SECTION("conservative stay policy: feasible but suboptimal") {
    const cmdplab::Gaps g = cmdplab::gaps(m, fixtures::lr_policy(1.0), ctx);
    CHECK(g.v_r == Catch::Approx(8.0 / 27.0).margin(1e-12));
    CHECK(g.opt_gap == Catch::Approx(16.0 / 27.0).margin(1e-12));
    CHECK(g.violation == 0.0);
  }
  SECTION("greedy switch policy: infeasible and super-optimal") {
    const cmdplab::Gaps g = cmdplab::gaps(m, fixtures::lr_policy(0.0), ctx);
    CHECK(g.v_r == Catch::Approx(4.0 / 3.0).margin(1e-12));
    CHECK(g.opt_gap == Catch::Approx(-4.0 / 9.0).margin(1e-12));
    CHECK(g.v_g == Catch::Approx(-2.0 / 9.0).margin(1e-12));
    CHECK(g.violation == Catch::Approx(2.0 / 9.0).margin(1e-12));
  }
  SECTION("the optimum itself has vanishing gap and violation") {
    const cmdplab::Gaps g = cmdplab::gaps(m, ctx.lp->pi_star, ctx);
    CHECK(std::fabs(g.opt_gap) <= 1e-8);
    CHECK(g.violation <= 1e-8);
  }
  SECTION("feasible iterates never beat the LP") {
    const cmdplab::SolverTrace tr = cmdplab::opgpd_run(
        m, OptimisticIterate::start(m), 0.1, ctx.cert.lambda_max, 2000, ctx);
    const std::vector<double>& gap = tr.column("opt_gap");
    const std::vector<double>& vio = tr.column("violation");
    for (std::size_t j = 0; j < gap.size(); ++j)
      if (vio[j] == 0.0) REQUIRE(gap[j] >= -1e-7);
  }
}

TEST_CASE("distribution mismatch coefficient") {
  cmdplab::Rng rng(424242);
  SECTION("single state: everything is one") {
    const Cmdp m = fixtures::one_state_mdp({0.5}, {0.2}, 0.9);
    const auto est = cmdplab::kappa_rho(m, 8, rng);
    REQUIRE(est.has_value());
    CHECK(est->lower_bound == Catch::Approx(1.0).margin(1e-12));
    CHECK(est->cap == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("two-state chain: exhaustive vertex sweep is exact") {
    const Cmdp m = fixtures::lr_mdp();
    const auto est = cmdplab::kappa_rho(m, 8, rng);
    REQUIRE(est.has_value());
    /* the switch policy concentrates visitation on the rare state:
     * d(R)/rho(R) = (5/12)/(2/9) = 15/8 */
    CHECK(est->lower_bound == Catch::Approx(1.875).margin(1e-9));
    CHECK(est->cap == Catch::Approx(4.5).margin(1e-12));
    CHECK(est->lower_bound <= est->cap + 1e-9);
  }
  SECTION("zero initial mass makes the coefficient unavailable") {
    const Cmdp m = fixtures::lr_mdp(0.25, 1.0);
    CHECK_FALSE(cmdplab::kappa_rho(m, 8, rng).has_value());
  }
  SECTION("random instances stay within the universal cap") {
    for (unsigned long long seed = 600; seed < 605; ++seed) {
      const Cmdp m = cmdplab::gen_random_cmdp(3, 3, 0.85, seed);
      const auto est = cmdplab::kappa_rho(m, 16, rng);
      REQUIRE(est.has_value());
      CHECK(est->lower_bound >= 1.0);
      CHECK(est->lower_bound <= est->cap + 1e-9);
    }
  }
}

TEST_CASE("oscillation counting") {
  SECTION("monotone series never oscillates") {
    CHECK(cmdplab::oscillation_count({1.0, 2.0, 3.0, 4.0}) == 0);
    CHECK(cmdplab::oscillation_count({4.0, 3.0, 1.0, 0.5}) == 0);
  }
  SECTION("strict alternation flips at every interior sample") {
    const std::vector<double> zig = {0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0};
    CHECK(cmdplab::oscillation_count(zig) == 8);
  }
  SECTION("sub-dead-band jitter is standstill, not cycling") {
    std::vector<double> tiny = {1.0};
    for (int i = 0; i < 50; ++i) tiny.push_back(1.0 + ((i % 2) ? 1e-15 : -1e-15));
    CHECK(cmdplab::oscillation_count(tiny) == 0);
    CHECK(cmdplab::oscillation_count(tiny, 0.0) > 0);
  }
  SECTION("non-finite samples are skipped") {
    CHECK(cmdplab::oscillation_count({1.0, std::nan(""), 2.0, 1.0, 2.0}) == 2);
  }
  SECTION("plain ascent cycles where the optimistic method flatlines") {
    /* measured on this instance: 305 direction changes vs 133 */
    const Cmdp m = cmdplab::gen_random_cmdp(5, 5, 0.9, 1);
    const cmdplab::FeasibilityCert cert = cmdplab::certify_feasibility(m);
    REQUIRE(cert.strict());
    cmdplab::DiagnosticsContext ctx;
    ctx.cert = cert;
    cmdplab::RpgPdConfig cfg;
    cfg.eta = 0.1;
    cfg.tau = 0.0;
    cfg.eps0 = 0.0;
    cfg.lambda_max = cert.lambda_max;
    const cmdplab::SolverTrace npg =
        cmdplab::rpgpd_run(m, PrimalDualIterate::start(m), cfg, 20000, ctx);
    const cmdplab::SolverTrace opg = cmdplab::opgpd_run(m, OptimisticIterate::start(m), 0.1,
                                                        cert.lambda_max, 20000, ctx);
    const long osc_npg = cmdplab::oscillation_count(npg, "v_g");
    const long osc_opg = cmdplab::oscillation_count(opg, "v_g");
    CHECK(osc_npg > osc_opg);
    CHECK(osc_npg >= 250);
    CHECK(osc_opg <= 200);
  }
}

TEST_CASE("tail contraction rate") {
  SECTION("an exact geometric series recovers its ratio") {
    std::vector<double> xs(40);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = std::pow(2.0, -double(i));
    const cmdplab::TailRate tr = cmdplab::tail_rate(xs, 20);
    CHECK(tr.factor == Catch::Approx(0.5).margin(1e-9));
    CHECK(tr.r_squared == Catch::Approx(1.0).margin(1e-9));
    CHECK(tr.points == 20);
  }
  SECTION("a constant tail reports factor one with full confidence") {
    const cmdplab::TailRate tr = cmdplab::tail_rate(std::vector<double>(30, 0.7), 10);
    CHECK(tr.factor == 1.0);
    CHECK(tr.r_squared == 1.0);
  }
  SECTION("too few usable points fall back to factor one, zero confidence") {
    const cmdplab::TailRate a = cmdplab::tail_rate({5.0}, 10);
    CHECK(a.factor == 1.0);
    CHECK(a.r_squared == 0.0);
    CHECK(a.points == 1);
    /* nonpositive values carry no logarithm */
    const cmdplab::TailRate b = cmdplab::tail_rate({-1.0, 0.0, 3.0}, 3);
    CHECK(b.points == 1);
    CHECK(b.factor == 1.0);
  }
  SECTION("window wider than the series uses everything") {
    std::vector<double> xs = {1.0, 0.5, 0.25};
    const cmdplab::TailRate tr = cmdplab::tail_rate(xs, 100);
    CHECK(tr.points == 3);
    CHECK(tr.factor == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("pre-convergence window of the optimistic run contracts cleanly") {
    /* the decaying segment, cut at the first time both gaps reach 1e-3,
     * fits a sub-unit factor with high confidence (measured 0.9985, 0.996) */
    const Cmdp m = fixtures::lr_mdp();
    const cmdplab::FeasibilityCert cert = cmdplab::certify_feasibility(m);
    cmdplab::DiagnosticsContext ctx;
    ctx.cert = cert;
    ctx.lp = cmdplab::solve_lp(m);
    ctx.dual = cmdplab::dual_scan(m, cert, 1e-5);
    const cmdplab::SolverTrace trc =
        cmdplab::opgpd_run(m, OptimisticIterate::start(m), 0.1, cert.lambda_max, 1000, ctx);
    const std::vector<double>& gap = trc.column("opt_gap");
    const std::vector<double>& vio = trc.column("violation");
    const std::vector<double>& sd = trc.column("saddle_dist");
    std::size_t t_star = sd.size();
    for (std::size_t j = 0; j < gap.size(); ++j)
      if (gap[j] <= 1e-3 && vio[j] <= 1e-3) {
        t_star = j + 1;
        break;
      }
    REQUIRE(t_star < 1000); /* measured 451 */
    const std::vector<double> prefix(sd.begin(), sd.begin() + static_cast<long>(t_star));
    const cmdplab::TailRate tr = cmdplab::tail_rate(prefix, prefix.size() / 2);
    CHECK(tr.factor < 1.0);
    CHECK(tr.r_squared >= 0.9);
  }
}

TEST_CASE("trace schema contract") {
  const auto& cols = cmdplab::SolverTrace::csv_columns();
  REQUIRE(cols == std::vector<std::string>{"iter", "v_r", "v_g", "lambda", "opt_gap",
                                           "violation", "phi", "theta", "zeta"});

  cmdplab::SolverTrace tr;
  cmdplab::TraceRow row;
  row.iter = 1;
  row.v_r = 0.25;
  tr.push(row);
  tr.push_extra("custom", 7.0);

  SECTION("unknown columns are rejected, extras are addressable") {
    CHECK_THROWS_AS(tr.column("no_such_column"), std::invalid_argument);
    CHECK(tr.has_extra("custom"));
    CHECK_FALSE(tr.has_extra("other"));
    CHECK(tr.column("custom").front() == 7.0);
  }
  SECTION("unpopulated metrics serialize as nan, never zero") {
    std::ostringstream os;
    tr.write_csv(os);
    const std::string text = os.str();
    CHECK(text.find("iter,v_r,v_g,lambda,opt_gap,violation,phi,theta,zeta\n") == 0);
    CHECK(text.find("nan") != std::string::npos);
  }
  SECTION("serialized doubles round-trip exactly") {
    const double v = 1.0 / 3.0;
    CHECK(std::strtod(cmdplab::SolverTrace::format_value(v).c_str(), nullptr) == v);
    const double w = 0.1 + 0.2;
    CHECK(std::strtod(cmdplab::SolverTrace::format_value(w).c_str(), nullptr) == w);
  }
}
