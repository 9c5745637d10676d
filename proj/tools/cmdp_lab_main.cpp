/*
 * cmdp-lab: experiment front end.
 *
 *   cmdp-lab gen    --states S --actions A --gamma G --seed N --out model.json
 *   cmdp-lab run    --mdp <file|gen:S,A,gamma,seed> --algo <tag> [solver flags] --out trace.csv
 *   cmdp-lab oracle --mdp <file|gen:...> [--tol T] [--out refs.json]
 *   cmdp-lab chart  <trace.csv> --columns a,b --out chart.svg [--log-scale]
 *
 * Algo tags: rpgpd, npgpd, opgpd, omwupd, opd, rpgpd-fa, rpgpd-sample.
 * Exit codes: 0 ok; 1 usage or unreadable input; 2 infeasible model or
 * solver abort.  The run summary is a single JSON line on stdout; traces go
 * to CSV files in the fixed nine-column schema.
 */

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmdplab/chart.hpp"
#include "cmdplab/cmdp.hpp"
#include "cmdplab/constants.hpp"
#include "cmdplab/fa.hpp"
#include "cmdplab/gen.hpp"
#include "cmdplab/io.hpp"
#include "cmdplab/metrics.hpp"
#include "cmdplab/oracle.hpp"
#include "cmdplab/run.hpp"

namespace {

using nlohmann::ordered_json;

/* "gen:S,A,gamma,seed" builds a model in memory; anything else is a path. */
cmdplab::ModelFile resolve_mdp(const std::string& spec) {
  if (spec.rfind("gen:", 0) == 0) {
    int s = 0, a = 0;
    double gamma = 0.0;
    unsigned long long seed = 0;
    if (std::sscanf(spec.c_str(), "gen:%d,%d,%lf,%llu", &s, &a, &gamma, &seed) != 4)
      throw std::runtime_error("bad generator spec (want gen:S,A,gamma,seed): " + spec);
    cmdplab::ModelFile m;
    m.mdp = cmdplab::gen_random_cmdp(s, a, gamma, seed);
    return m;
  }
  return cmdplab::load_model(spec);
}

ordered_json cert_json(const cmdplab::FeasibilityCert& cert) {
  ordered_json j;
  j["xi"] = cert.xi;
  j["feasible"] = cert.feasible();
  j["strict"] = cert.strict();
  j["lambda_max"] = std::isfinite(cert.lambda_max) ? ordered_json(cert.lambda_max)
                                                   : ordered_json(nullptr);
  return j;
}

ordered_json policy_json(const cmdplab::TabularPolicy& pi) {
  ordered_json rows = ordered_json::array();
  for (int s = 0; s < pi.n_states; ++s) rows.push_back(pi.row(s));
  return rows;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = s.find(',', pos);
    const std::string piece = s.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

double finite_or_nan(const std::vector<double>& col, std::size_t i) {
  return i < col.size() ? col[i] : std::nan("");
}

ordered_json maybe(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

int run_command(const std::string& mdp_spec, const std::string& algo, double eta, double tau,
                double eps0, double delta, long iters, unsigned long long seed, double tol,
                const std::string& out, bool tau_given, bool eps0_given) {
  cmdplab::ModelFile model;
  try {
    model = resolve_mdp(mdp_spec);
  } catch (const std::exception& e) {
    std::cerr << "cmdp-lab run: " << e.what() << "\n";
    return 1;
  }

  try {
    cmdplab::Cmdp mdp = model.mdp;
    if (delta > 0.0) mdp = cmdplab::conservative(mdp, delta);

    const cmdplab::FeasibilityCert cert = cmdplab::certify_feasibility(mdp);
    if (!cert.strict()) {
      std::cerr << "cmdp-lab run: model is not strictly feasible: max_pi V_g^pi(rho) = "
                << cert.xi << " (certificate witness is a deterministic policy)\n";
      return 2;
    }

    cmdplab::DiagnosticsContext ctx;
    ctx.cert = cert;
    ctx.lp = cmdplab::solve_lp(mdp);
    ctx.dual = cmdplab::dual_scan(mdp, cert, tol);

    const bool policy_space_regularized = (algo == "rpgpd" || algo == "rpgpd-fa" ||
                                           algo == "rpgpd-sample");
    if (!policy_space_regularized && tau_given && tau != 0.0)
      std::cerr << "[" << algo << "] warning: --tau is ignored by this algorithm\n";
    if ((algo == "opgpd" || algo == "omwupd" || algo == "opd") && eps0_given)
      std::cerr << "[" << algo << "] warning: --eps0 is ignored by this algorithm\n";

    cmdplab::SolverTrace trace;
    if (algo == "rpgpd" || algo == "npgpd") {
      cmdplab::RpgPdConfig cfg;
      cfg.eta = eta;
      cfg.tau = (algo == "npgpd") ? 0.0 : tau;
      cfg.eps0 = (algo == "npgpd") ? 0.0 : eps0;
      cfg.lambda_max = cert.lambda_max;
      if (algo == "npgpd" && tau_given && tau != 0.0)
        std::cerr << "[npgpd] warning: --tau forced to 0 (unregularized mode)\n";
      trace = cmdplab::rpgpd_run(mdp, cmdplab::PrimalDualIterate::start(mdp), cfg, iters, ctx);
    } else if (algo == "opgpd" || algo == "omwupd") {
      trace = cmdplab::optimistic_run(mdp, cmdplab::OptimisticIterate::start(mdp), eta,
                                      cert.lambda_max, iters, ctx,
                                      algo == "opgpd" ? cmdplab::OptimisticKind::projected
                                                      : cmdplab::OptimisticKind::mwu);
    } else if (algo == "opd") {
      cmdplab::OpdConfig cfg;
      cfg.eta = eta;
      cfg.lambda_max = cert.lambda_max;
      cfg.mu_max = cmdplab::mu_cap(mdp.gamma, cert.xi);
      const double ceiling =
          1.0 / (8.0 * cmdplab::l_f_bound(cfg.lambda_max, cfg.mu_max, mdp.gamma, mdp.n_states));
      if (eta >= ceiling)
        std::cerr << "[opd] warning: eta = " << eta << " is at or above the guaranteed ceiling "
                  << ceiling << "\n";
      trace = cmdplab::opd_run(mdp, cmdplab::OpdIterate::start(mdp), cfg, iters, ctx);
    } else if (algo == "rpgpd-fa" || algo == "rpgpd-sample") {
      const cmdplab::FeatureMap feat =
          model.phi ? *model.phi : cmdplab::FeatureMap::indicator(mdp.n_states, mdp.n_actions);
      cmdplab::RpgPdConfig cfg;
      cfg.eta = eta;
      cfg.tau = tau;
      cfg.eps0 = eps0;
      cfg.lambda_max = cert.lambda_max;
      const std::vector<double> nu = cmdplab::default_nu(mdp);
      if (algo == "rpgpd-fa") {
        trace = cmdplab::fa_run(mdp, feat, cmdplab::PrimalDualIterate::start(mdp), cfg, nu, iters,
                                ctx);
      } else {
        cmdplab::SampleConfig sc;
        sc.sgd_steps = 100;
        sc.kappa0 = 1e-3;
        /* ball radius: a bound on the composite Q magnitude for this instance */
        sc.w_cap = (1.0 + cert.lambda_max) / (1.0 - mdp.gamma) +
                   (tau > 0.0 && eps0 > 0.0
                        ? tau * std::log(static_cast<double>(mdp.n_actions) / eps0) /
                              (1.0 - mdp.gamma)
                        : 0.0);
        cmdplab::Rng rng(seed);
        trace = cmdplab::sample_run(mdp, feat, cmdplab::PrimalDualIterate::start(mdp), cfg, sc, nu,
                                    iters, ctx, rng);
      }
    } else {
      std::cerr << "cmdp-lab run: unknown algo '" << algo
                << "' (want rpgpd|npgpd|opgpd|omwupd|opd|rpgpd-fa|rpgpd-sample)\n";
      return 1;
    }

    trace.save_csv(out);

    ordered_json summary;
    summary["algo"] = algo;
    summary["iters"] = iters;
    summary["out"] = out;
    if (trace.size() > 0) {
      const std::size_t last = trace.size() - 1;
      ordered_json fin;
      fin["iter"] = trace.iters()[last];
      fin["v_r"] = maybe(finite_or_nan(trace.column("v_r"), last));
      fin["v_g"] = maybe(finite_or_nan(trace.column("v_g"), last));
      fin["lambda"] = maybe(finite_or_nan(trace.column("lambda"), last));
      fin["opt_gap"] = maybe(finite_or_nan(trace.column("opt_gap"), last));
      fin["violation"] = maybe(finite_or_nan(trace.column("violation"), last));
      summary["final"] = std::move(fin);

      ordered_json osc;
      osc["v_g"] = cmdplab::oscillation_count(trace, "v_g");
      osc["lambda"] = cmdplab::oscillation_count(trace, "lambda");
      summary["oscillations"] = std::move(osc);

      const std::string tail_col = trace.has_extra("saddle_dist")   ? "saddle_dist"
                                   : trace.has_extra("dist_proxy") ? "dist_proxy"
                                                                    : "opt_gap";
      const std::size_t window =
          std::max<std::size_t>(10, trace.size() / 10);
      const cmdplab::TailRate tr = cmdplab::tail_rate(trace, tail_col, window);
      ordered_json tail;
      tail["column"] = tail_col;
      tail["factor"] = maybe(tr.factor);
      tail["r_squared"] = maybe(tr.r_squared);
      tail["points"] = tr.points;
      summary["tail"] = std::move(tail);
    } else {
      summary["final"] = nullptr;
    }
    std::cout << summary.dump() << "\n";
    return 0;
  } catch (const cmdplab::InfeasibleError& e) {
    std::cerr << "cmdp-lab run: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cmdp-lab run: " << e.what() << "\n";
    return 2;
  }
}

int oracle_command(const std::string& mdp_spec, double tol, const std::string& out) {
  cmdplab::ModelFile model;
  try {
    model = resolve_mdp(mdp_spec);
  } catch (const std::exception& e) {
    std::cerr << "cmdp-lab oracle: " << e.what() << "\n";
    return 1;
  }

  try {
    const cmdplab::Cmdp& mdp = model.mdp;
    const cmdplab::FeasibilityCert cert = cmdplab::certify_feasibility(mdp);
    ordered_json j;
    j["cert"] = cert_json(cert);

    int code = 0;
    if (cert.strict()) {
      const cmdplab::LpSolution lp = cmdplab::solve_lp(mdp);
      ordered_json lpj;
      lpj["value"] = lp.value;
      lpj["unique"] = lp.unique_flag;
      lpj["pi_star"] = policy_json(lp.pi_star);
      ordered_json qrows = ordered_json::array();
      for (int s = 0; s < mdp.n_states; ++s) {
        ordered_json row = ordered_json::array();
        for (int a = 0; a < mdp.n_actions; ++a) row.push_back(lp.q_star.at(s, a));
        qrows.push_back(std::move(row));
      }
      lpj["q_star"] = std::move(qrows);
      j["lp"] = std::move(lpj);

      const cmdplab::DualScanResult dual = cmdplab::dual_scan(mdp, cert, tol);
      ordered_json dj;
      dj["lo"] = dual.lo;
      dj["hi"] = dual.hi;
      dj["lambda_star"] = dual.lambda_star;
      dj["value"] = dual.value;
      j["dual"] = std::move(dj);
    } else {
      code = 2;
    }

    const std::string text = j.dump();
    std::cout << text << "\n";
    if (!out.empty()) {
      std::ofstream f(out, std::ios::binary);
      if (!f) throw std::runtime_error("cannot open " + out);
      f << text << "\n";
    }
    return code;
  } catch (const std::exception& e) {
    std::cerr << "cmdp-lab oracle: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constrained-MDP primal-dual experiment toolkit"};
  app.require_subcommand(1);

  /* gen */
  auto* gen = app.add_subcommand("gen", "generate a seeded random model as JSON");
  int g_states = 5, g_actions = 5;
  double g_gamma = 0.9;
  unsigned long long g_seed = 0;
  std::string g_out = "model.json";
  gen->add_option("--states", g_states, "number of states")->check(CLI::PositiveNumber);
  gen->add_option("--actions", g_actions, "number of actions")->check(CLI::PositiveNumber);
  gen->add_option("--gamma", g_gamma, "discount factor in [0,1)");
  gen->add_option("--seed", g_seed, "generator seed");
  gen->add_option("--out", g_out, "output JSON path");

  /* run */
  auto* run = app.add_subcommand("run", "run a solver and write its trace CSV");
  std::string r_mdp, r_algo = "rpgpd", r_out = "trace.csv";
  double r_eta = 0.1, r_tau = 0.08, r_eps0 = 1e-6, r_delta = 0.0, r_tol = 1e-5;
  long r_iters = 1000;
  unsigned long long r_seed = 0;
  run->add_option("--mdp", r_mdp, "model JSON path or gen:S,A,gamma,seed")->required();
  run->add_option("--algo", r_algo, "rpgpd|npgpd|opgpd|omwupd|opd|rpgpd-fa|rpgpd-sample");
  run->add_option("--eta", r_eta, "stepsize");
  auto* tau_opt = run->add_option("--tau", r_tau, "regularization strength");
  auto* eps0_opt = run->add_option("--eps0", r_eps0, "restricted-simplex parameter");
  run->add_option("--delta", r_delta, "conservative constraint tightening");
  run->add_option("--iters", r_iters, "iteration budget")->check(CLI::NonNegativeNumber);
  run->add_option("--seed", r_seed, "rng seed for sample-based algorithms");
  run->add_option("--tol", r_tol, "dual-scan bracket tolerance");
  run->add_option("--out", r_out, "trace CSV path");

  /* oracle */
  auto* oracle = app.add_subcommand("oracle", "print feasibility/LP/dual references as JSON");
  std::string o_mdp, o_out;
  double o_tol = 1e-5;
  oracle->add_option("--mdp", o_mdp, "model JSON path or gen:S,A,gamma,seed")->required();
  oracle->add_option("--tol", o_tol, "dual-scan bracket tolerance");
  oracle->add_option("--out", o_out, "also write the JSON to this path");

  /* chart */
  auto* chart = app.add_subcommand("chart", "render a trace CSV as a static SVG line chart");
  std::string c_csv, c_columns = "opt_gap,violation", c_out = "chart.svg", c_title;
  bool c_log = false;
  chart->add_option("csv", c_csv, "input trace CSV")->required();
  chart->add_option("--columns", c_columns, "comma-separated column names to plot");
  chart->add_option("--out", c_out, "output SVG path");
  chart->add_option("--title", c_title, "chart title");
  chart->add_flag("--log-scale", c_log, "plot values on a log10 axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*gen) {
    try {
      const cmdplab::Cmdp mdp = cmdplab::gen_random_cmdp(g_states, g_actions, g_gamma, g_seed);
      cmdplab::save_model(g_out, mdp);
      ordered_json j;
      j["out"] = g_out;
      j["n_states"] = g_states;
      j["n_actions"] = g_actions;
      j["gamma"] = g_gamma;
      j["seed"] = g_seed;
      std::cout << j.dump() << "\n";
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "cmdp-lab gen: " << e.what() << "\n";
      return 1;
    }
  }
  if (*run)
    return run_command(r_mdp, r_algo, r_eta, r_tau, r_eps0, r_delta, r_iters, r_seed, r_tol, r_out,
                       tau_opt->count() > 0, eps0_opt->count() > 0);
  if (*oracle) return oracle_command(o_mdp, o_tol, o_out);
  if (*chart) {
    try {
      cmdplab::ChartOptions opt;
      opt.columns = split_commas(c_columns);
      opt.log_scale = c_log;
      opt.title = c_title;
      cmdplab::chart_csv_to_svg(c_csv, opt, c_out);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "cmdp-lab chart: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
