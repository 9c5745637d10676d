#pragma once

/*
 * Per-iteration solver trace with a fixed CSV schema.
 *
 * The nine canonical columns are written to CSV in this exact order:
 *   iter, v_r, v_g, lambda, opt_gap, violation, phi, theta, zeta
 * Metrics that are unavailable for a given algorithm or missing a reference
 * are recorded as NaN (serialized "nan"), never as zero.  Solver-specific
 * extra series (e.g. optimistic saddle distances, flow residuals) are held
 * alongside and accessible by name, but are not part of the CSV schema.
 */

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmdplab {

struct TraceRow {
  long iter = 0;
  double v_r = std::nan("");
  double v_g = std::nan("");
  double lambda = std::nan("");
  double opt_gap = std::nan("");
  double violation = std::nan("");
  double phi = std::nan("");
  double theta = std::nan("");
  double zeta = std::nan("");
};

class SolverTrace {
 public:
  static const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols = {"iter",      "v_r", "v_g",   "lambda", "opt_gap",
                                                  "violation", "phi", "theta", "zeta"};
    return cols;
  }

  void push(const TraceRow& row) {
    iter_.push_back(row.iter);
    v_r_.push_back(row.v_r);
    v_g_.push_back(row.v_g);
    lambda_.push_back(row.lambda);
    opt_gap_.push_back(row.opt_gap);
    violation_.push_back(row.violation);
    phi_.push_back(row.phi);
    theta_.push_back(row.theta);
    zeta_.push_back(row.zeta);
  }

  void push_extra(const std::string& name, double value) { extras_[name].push_back(value); }

  std::size_t size() const { return iter_.size(); }

  /* Column lookup by name; extras are addressable the same way. */
  const std::vector<double>& column(const std::string& name) const {
    if (name == "v_r") return v_r_;
    if (name == "v_g") return v_g_;
    if (name == "lambda") return lambda_;
    if (name == "opt_gap") return opt_gap_;
    if (name == "violation") return violation_;
    if (name == "phi") return phi_;
    if (name == "theta") return theta_;
    if (name == "zeta") return zeta_;
    const auto it = extras_.find(name);
    if (it == extras_.end()) throw std::invalid_argument("SolverTrace: unknown column " + name);
    return it->second;
  }
  const std::vector<long>& iters() const { return iter_; }
  bool has_extra(const std::string& name) const { return extras_.count(name) != 0; }

  /* Decimal doubles at 17 significant digits: enough to round-trip exactly. */
  static std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

  void write_csv(std::ostream& os) const {
    const auto& cols = csv_columns();
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << "\n";
    for (std::size_t i = 0; i < iter_.size(); ++i) {
      os << iter_[i] << ',' << format_value(v_r_[i]) << ',' << format_value(v_g_[i]) << ','
         << format_value(lambda_[i]) << ',' << format_value(opt_gap_[i]) << ','
         << format_value(violation_[i]) << ',' << format_value(phi_[i]) << ','
         << format_value(theta_[i]) << ',' << format_value(zeta_[i]) << "\n";
    }
  }

  void save_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("SolverTrace: cannot open " + path);
    write_csv(f);
  }

 private:
  std::vector<long> iter_;
  std::vector<double> v_r_, v_g_, lambda_, opt_gap_, violation_, phi_, theta_, zeta_;
  std::map<std::string, std::vector<double>> extras_;
};

}  // namespace cmdplab
