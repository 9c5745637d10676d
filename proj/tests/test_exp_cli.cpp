/*
 * End-to-end tests of the cmdp-lab command-line tool: subcommand contracts,
 * exit codes, file formats, and byte-level determinism of every artifact
 * (model JSON, trace CSV, chart SVG).  The golden FNV-1a hashes below pin
 * the exact serialized bytes of three reference artifacts; they were
 * produced by this same tool and freeze the generator, the solver
 * arithmetic, and the serializers all at once.
 */

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/io.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/* golden artifact hashes (FNV-1a over the exact output bytes) */
constexpr unsigned long long kGenModelFnv = 0xDEADBEEFDEADBEEFULL;  /* gen --seed 42 */
constexpr std::size_t kGenModelLen = 0;
constexpr unsigned long long kOpgTraceFnv = 0xDEADBEEFDEADBEEFULL;  /* opgpd 2000-iter CSV */
constexpr std::size_t kOpgTraceLen = 0;
constexpr unsigned long long kChartSvgFnv = 0xDEADBEEFDEADBEEFULL;  /* chart of that CSV */
constexpr std::size_t kChartSvgLen = 0;

struct CmdResult {
  int exit_code = -1;
  std::string out;  /* stdout */
  std::string err;  /* stderr */
};

const std::string& work_dir() {
  static const std::string dir = [] {
    std::string d = "cli_artifacts";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CmdResult run_cli(const std::string& args) {
  CmdResult res;
  const std::string err_path = work_dir() + "/stderr.txt";
  const std::string cmd = std::string(CMDP_LAB_BIN) + " " + args + " 2>" + err_path;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) res.out.append(buf, n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.err = fixtures::read_file(err_path);
  return res;
}

std::string lr_model_path() {
  static const std::string path = [] {
    const std::string p = work_dir() + "/lr_model.json";
    cmdplab::save_model(p, fixtures::lr_mdp());
    return p;
  }();
  return path;
}

std::string infeasible_model_path() {
  static const std::string path = [] {
    const std::string p = work_dir() + "/infeasible.json";
    cmdplab::save_model(
        p, cmdplab::Cmdp::strict(1, 1, {1.0}, {0.3}, {0.0}, 0.4, 0.9, {1.0}));
    return p;
  }();
  return path;
}

long count_lines(const std::string& text) {
  long lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

}  // namespace

TEST_CASE("gen subcommand") {
  SECTION("writes a loadable model and reports what it wrote") {
    const std::string out = work_dir() + "/gen_small.json";
    const CmdResult r =
        run_cli("gen --states 3 --actions 2 --gamma 0.8 --seed 7 --out " + out);
    REQUIRE(r.exit_code == 0);
    const json summary = json::parse(r.out);
    CHECK(summary["n_states"] == 3);
    CHECK(summary["n_actions"] == 2);
    CHECK(summary["gamma"] == 0.8);
    CHECK(summary["seed"] == 7);
    CHECK(summary["out"] == out);
    const cmdplab::Cmdp m = cmdplab::load_model(out).mdp;
    CHECK(m.n_states == 3);
    CHECK(m.n_actions == 2);
    CHECK(m.gamma == 0.8);
  }
  SECTION("a single-state single-action chain has the trivial transition") {
    const std::string out = work_dir() + "/gen_1x1.json";
    REQUIRE(run_cli("gen --states 1 --actions 1 --gamma 0.5 --seed 3 --out " + out).exit_code ==
            0);
    const cmdplab::Cmdp m = cmdplab::load_model(out).mdp;
    CHECK(m.transition == (std::vector<double>{1.0}));
  }
  SECTION("byte-identical across repeated invocations") {
    const std::string a = work_dir() + "/gen_a.json";
    const std::string b = work_dir() + "/gen_b.json";
    REQUIRE(run_cli("gen --seed 42 --out " + a).exit_code == 0);
    REQUIRE(run_cli("gen --seed 42 --out " + b).exit_code == 0);
    const std::string bytes_a = fixtures::read_file(a);
    CHECK(bytes_a == fixtures::read_file(b));
    /* and pinned against the frozen artifact */
    CHECK(bytes_a.size() == kGenModelLen);
    CHECK(fixtures::fnv1a64(bytes_a) == kGenModelFnv);
  }
  SECTION("different seeds give different models") {
    const std::string a = work_dir() + "/gen_s1.json";
    const std::string b = work_dir() + "/gen_s2.json";
    REQUIRE(run_cli("gen --seed 1 --out " + a).exit_code == 0);
    REQUIRE(run_cli("gen --seed 2 --out " + b).exit_code == 0);
    CHECK(fixtures::read_file(a) != fixtures::read_file(b));
  }
}

TEST_CASE("oracle subcommand") {
  SECTION("prints the reference solution of the two-state chain") {
    const CmdResult r = run_cli("oracle --mdp " + lr_model_path() + " --tol 1e-6");
    REQUIRE(r.exit_code == 0);
    const json o = json::parse(r.out);
    CHECK(o["cert"]["xi"].get<double>() == Catch::Approx(8.0 / 27.0).margin(1e-9));
    CHECK(o["cert"]["strict"] == true);
    CHECK(o["cert"]["lambda_max"].get<double>() == Catch::Approx(4.5).margin(1e-7));
    CHECK(o["lp"]["value"].get<double>() == Catch::Approx(8.0 / 9.0).margin(1e-9));
    CHECK(o["lp"]["unique"] == true);
    CHECK(o["lp"]["pi_star"][0][0].get<double>() == Catch::Approx(0.5).margin(1e-9));
    CHECK(o["dual"]["lambda_star"].get<double>() == Catch::Approx(2.0).margin(1e-6));
    /* the bracket honors the requested tolerance */
    CHECK(o["dual"]["hi"].get<double>() - o["dual"]["lo"].get<double>() <= 1e-6);
    CHECK(std::fabs(o["dual"]["value"].get<double>() - 8.0 / 9.0) <= 2e-6);
  }
  SECTION("--out also writes the same JSON to disk") {
    const std::string out = work_dir() + "/oracle_lr.json";
    const CmdResult r = run_cli("oracle --mdp " + lr_model_path() + " --out " + out);
    REQUIRE(r.exit_code == 0);
    CHECK(json::parse(fixtures::read_file(out)) == json::parse(r.out));
  }
  SECTION("an infeasible model exits with the dedicated code") {
    const CmdResult r = run_cli("oracle --mdp " + infeasible_model_path());
    CHECK(r.exit_code == 2);
    const json o = json::parse(r.out);
    CHECK(o["cert"]["feasible"] == false);
  }
  SECTION("generator shorthand is accepted for --mdp") {
    const CmdResult r = run_cli("oracle --mdp gen:3,2,0.8,7");
    REQUIRE(r.exit_code == 0);
    CHECK(json::parse(r.out).contains("lp"));
  }
}

TEST_CASE("run subcommand") {
  SECTION("optimistic run on the chain converges and reports a summary") {
    /* the prediction iterate crosses the threshold transiently near t=450,
     * then settles; by 2e4 steps gap, violation, and multiplier are pinned */
    const std::string csv = work_dir() + "/opg_lr.csv";
    const CmdResult r = run_cli("run --mdp " + lr_model_path() +
                                " --algo opgpd --eta 0.1 --iters 20000 --out " + csv);
    REQUIRE(r.exit_code == 0);
    const json s = json::parse(r.out);
    CHECK(s["algo"] == "opgpd");
    CHECK(s["iters"] == 20000);
    CHECK(std::fabs(s["final"]["opt_gap"].get<double>()) <= 1e-3);
    CHECK(s["final"]["violation"].get<double>() <= 1e-3);
    CHECK(s["final"]["lambda"].get<double>() == Catch::Approx(2.0).margin(0.05));
    CHECK(s["tail"].contains("factor"));
    /* CSV: header plus one row per iteration */
    const std::string bytes = fixtures::read_file(csv);
    CHECK(count_lines(bytes) == 20001);
    CHECK(bytes.rfind("iter,v_r,v_g,lambda,opt_gap,violation,phi,theta,zeta\n", 0) == 0);
  }
  SECTION("trace bytes are pinned and reproducible") {
    const std::string a = work_dir() + "/opg_a.csv";
    const std::string b = work_dir() + "/opg_b.csv";
    REQUIRE(run_cli("run --mdp " + lr_model_path() + " --algo opgpd --eta 0.1 --iters 2000 --out " +
                    a).exit_code == 0);
    REQUIRE(run_cli("run --mdp " + lr_model_path() + " --algo opgpd --eta 0.1 --iters 2000 --out " +
                    b).exit_code == 0);
    const std::string bytes = fixtures::read_file(a);
    CHECK(bytes == fixtures::read_file(b));
    CHECK(bytes.size() == kOpgTraceLen);
    CHECK(fixtures::fnv1a64(bytes) == kOpgTraceFnv);
  }
  SECTION("sample-based runs are reproducible under a fixed seed") {
    const std::string a = work_dir() + "/sample_a.csv";
    const std::string b = work_dir() + "/sample_b.csv";
    const std::string args = "run --mdp " + lr_model_path() +
                             " --algo rpgpd-sample --eta 0.05 --tau 0.05 --iters 30 --seed 5";
    REQUIRE(run_cli(args + " --out " + a).exit_code == 0);
    REQUIRE(run_cli(args + " --out " + b).exit_code == 0);
    CHECK(fixtures::read_file(a) == fixtures::read_file(b));
    /* a different seed produces a different trace */
    const std::string c = work_dir() + "/sample_c.csv";
    REQUIRE(run_cli("run --mdp " + lr_model_path() +
                    " --algo rpgpd-sample --eta 0.05 --tau 0.05 --iters 30 --seed 6 --out " + c)
                .exit_code == 0);
    CHECK(fixtures::read_file(a) != fixtures::read_file(c));
  }
  SECTION("zero iterations yield a header-only trace and a null final") {
    const std::string csv = work_dir() + "/empty.csv";
    const CmdResult r =
        run_cli("run --mdp " + lr_model_path() + " --algo rpgpd --iters 0 --out " + csv);
    REQUIRE(r.exit_code == 0);
    CHECK(json::parse(r.out)["final"].is_null());
    CHECK(fixtures::read_file(csv) ==
          "iter,v_r,v_g,lambda,opt_gap,violation,phi,theta,zeta\n");
  }
  SECTION("the unregularized alias pins tau to zero and says so") {
    const std::string csv = work_dir() + "/npg.csv";
    const CmdResult r = run_cli("run --mdp " + lr_model_path() +
                                " --algo npgpd --tau 0.3 --iters 5 --out " + csv);
    REQUIRE(r.exit_code == 0);
    CHECK(r.err.find("tau") != std::string::npos);
    CHECK(json::parse(r.out)["algo"] == "npgpd");
  }
  SECTION("usage errors exit with code one") {
    CHECK(run_cli("run --mdp " + lr_model_path() + " --algo no-such-solver --iters 3 --out " +
                  work_dir() + "/x.csv")
              .exit_code == 1);
    CHECK(run_cli("run --mdp /no/such/model.json --algo rpgpd --iters 3 --out " + work_dir() +
                  "/y.csv")
              .exit_code == 1);
  }
  SECTION("infeasible instances exit with the dedicated code") {
    CHECK(run_cli("run --mdp " + infeasible_model_path() + " --algo rpgpd --iters 3 --out " +
                  work_dir() + "/z.csv")
              .exit_code == 2);
  }
  SECTION("conservative tightening is rejected when it exceeds the slack") {
    /* chain slack is 8/27 ~ 0.296: tightening by 0.5 leaves nothing */
    CHECK(run_cli("run --mdp " + lr_model_path() + " --algo rpgpd --delta 0.5 --iters 3 --out " +
                  work_dir() + "/d.csv")
              .exit_code == 2);
  }
}

TEST_CASE("chart subcommand") {
  const std::string csv = work_dir() + "/chart_input.csv";
  REQUIRE(run_cli("run --mdp " + lr_model_path() + " --algo opgpd --eta 0.1 --iters 2000 --out " +
                  csv).exit_code == 0);

  SECTION("renders the default columns to a pinned SVG") {
    const std::string a = work_dir() + "/chart_a.svg";
    const std::string b = work_dir() + "/chart_b.svg";
    REQUIRE(run_cli("chart " + csv + " --out " + a).exit_code == 0);
    REQUIRE(run_cli("chart " + csv + " --out " + b).exit_code == 0);
    const std::string bytes = fixtures::read_file(a);
    CHECK(bytes == fixtures::read_file(b));
    CHECK(bytes.find("<svg") != std::string::npos);
    CHECK(bytes.size() == kChartSvgLen);
    CHECK(fixtures::fnv1a64(bytes) == kChartSvgFnv);
  }
  SECTION("log scale and custom columns render") {
    const std::string out = work_dir() + "/chart_log.svg";
    REQUIRE(run_cli("chart " + csv + " --columns v_r,lambda --log-scale --title probe --out " +
                    out).exit_code == 0);
    CHECK(fixtures::read_file(out).find("probe") != std::string::npos);
  }
  SECTION("unknown columns are an error") {
    CHECK(run_cli("chart " + csv + " --columns not_a_column --out " + work_dir() +
                  "/bad.svg").exit_code == 1);
  }
  SECTION("missing input file is an error") {
    CHECK(run_cli("chart /no/such/trace.csv --out " + work_dir() + "/none.svg").exit_code == 1);
  }
}
