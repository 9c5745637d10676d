#pragma once

/*
 * Shared test fixtures.
 *
 * The workhorse is a two-state chain ("left/right") whose constrained optimum
 * is a genuinely stochastic policy, so it exercises everything a deterministic
 * optimum would hide.  All its values have closed forms, which the tests use
 * as ground truth.  Alongside it live a one-state builder, slow-but-simple
 * reference evaluators (plain value iteration, soft-Q sweeps) that are
 * independent of the Eigen-based solvers, and small file/byte helpers.
 */

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmdplab/cmdp.hpp"

namespace fixtures {

/*
 * Two-state chain: state 0 ("L") either loops with (r, g) = (0, 0) or jumps
 * to state 1 ("R") with (1, -1).  R is absorbing: action 0 loops with (1, 1),
 * action 1 loops with (1, 1/2).  Action 1 in R earns the same reward but
 * wastes constraint budget, which makes the optimal occupancy measure unique.
 *
 * With gamma = 1/4, rho(L) = 7/9: the best feasible policy mixes at
 * pi(stay|L) = 1/2, the constraint is exactly binding there, the optimal
 * value is 8/9, the Slater slack is 8/27 (witness pi(stay|L) = 1), and the
 * optimal dual is lambda* = 2.
 */
inline cmdplab::Cmdp lr_mdp(double gamma = 0.25, double rho_l = 7.0 / 9.0) {
  const int S = 2, A = 2;
  std::vector<double> trans(S * A * S, 0.0), r(S * A, 0.0), g(S * A, 0.0);
  auto t = [&](int s, int a) -> double* { return &trans[(s * A + a) * S]; };
  t(0, 0)[0] = 1.0; /* L, stay */
  t(0, 1)[1] = 1.0; /* L -> R  */
  t(1, 0)[1] = 1.0; /* R, loop */
  t(1, 1)[1] = 1.0; /* R, loop (wasteful twin) */
  r[0] = 0.0; r[1] = 1.0; r[2] = 1.0; r[3] = 1.0;
  g[0] = 0.0; g[1] = -1.0; g[2] = 1.0; g[3] = 0.5;
  return cmdplab::Cmdp::raw_g(S, A, trans, r, g, gamma, {rho_l, 1.0 - rho_l});
}

/* pi(stay|L) = p; R always plays its first (non-wasteful) loop. */
inline cmdplab::TabularPolicy lr_policy(double p) {
  cmdplab::TabularPolicy pi = cmdplab::TabularPolicy::uniform(2, 2);
  pi.set_row(0, {p, 1.0 - p});
  pi.set_row(1, {1.0, 0.0});
  return pi;
}

/* Closed forms for the chain under lr_policy(p). */
inline double lr_v_r_left(double gamma, double p) {
  return (1.0 - p) / ((1.0 - gamma * p) * (1.0 - gamma));
}
inline double lr_v_g_left(double gamma, double p) {
  return (1.0 - p) * (2.0 * gamma - 1.0) / ((1.0 - gamma * p) * (1.0 - gamma));
}
inline double lr_v_r_rho(double gamma, double rho_l, double p) {
  return rho_l * lr_v_r_left(gamma, p) + (1.0 - rho_l) / (1.0 - gamma);
}
inline double lr_v_g_rho(double gamma, double rho_l, double p) {
  return rho_l * lr_v_g_left(gamma, p) + (1.0 - rho_l) / (1.0 - gamma);
}

/* One state, one action per (r, g) pair, all self-loops. */
inline cmdplab::Cmdp one_state_mdp(const std::vector<double>& r, const std::vector<double>& g,
                                   double gamma) {
  const int A = static_cast<int>(r.size());
  if (g.size() != r.size()) throw std::invalid_argument("one_state_mdp: r/g size mismatch");
  std::vector<double> trans(A, 1.0);
  return cmdplab::Cmdp::raw_g(1, A, trans, r, g, gamma, {1.0});
}

/* Deterministic 3-state chain 0 -> 1 -> 2 -> 2 under action 0; action 1
 * short-circuits straight to state 2.  Used by the rollout estimators. */
inline cmdplab::Cmdp chain3_mdp(double gamma) {
  const int S = 3, A = 2;
  std::vector<double> trans(S * A * S, 0.0), r(S * A, 0.0), g(S * A, 0.0);
  auto t = [&](int s, int a) -> double* { return &trans[(s * A + a) * S]; };
  t(0, 0)[1] = 1.0;
  t(0, 1)[2] = 1.0;
  t(1, 0)[2] = 1.0;
  t(1, 1)[2] = 1.0;
  t(2, 0)[2] = 1.0;
  t(2, 1)[2] = 1.0;
  r = {0.2, 0.9, 0.5, 0.1, 1.0, 0.0};
  g = {0.5, -0.5, 1.0, 0.25, -0.25, 0.75};
  return cmdplab::Cmdp::raw_g(S, A, trans, r, g, gamma, {1.0, 0.0, 0.0});
}

/* Plain fixed-sweep value iteration for V^pi under an arbitrary signal;
 * intentionally naive so it shares nothing with the library's LU solve. */
inline std::vector<double> vi_value(const cmdplab::Cmdp& mdp, const cmdplab::TabularPolicy& pi,
                                    const std::vector<double>& signal, int sweeps = 10000) {
  std::vector<double> v(mdp.n_states, 0.0), nv(mdp.n_states, 0.0);
  for (int k = 0; k < sweeps; ++k) {
    for (int s = 0; s < mdp.n_states; ++s) {
      double acc = 0.0;
      for (int a = 0; a < mdp.n_actions; ++a) {
        double q = signal[mdp.sa(s, a)];
        for (int s2 = 0; s2 < mdp.n_states; ++s2) q += mdp.gamma * mdp.p(s, a, s2) * v[s2];
        acc += pi.prob(s, a) * q;
      }
      nv[s] = acc;
    }
    v.swap(nv);
  }
  return v;
}

/* Entropy-adjusted Q reference: sweep iteration on the composite signal
 * r + lambda*g - tau*log(pi). */
inline std::vector<double> vi_soft_q(const cmdplab::Cmdp& mdp, const cmdplab::TabularPolicy& pi,
                                     double lambda, double tau, int sweeps = 10000) {
  std::vector<double> signal(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      signal[mdp.sa(s, a)] =
          mdp.reward[mdp.sa(s, a)] + lambda * mdp.g(s, a) - tau * std::log(pi.prob(s, a));
  const std::vector<double> v = vi_value(mdp, pi, signal, sweeps);
  std::vector<double> q(signal.size());
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      double x = signal[mdp.sa(s, a)];
      for (int s2 = 0; s2 < mdp.n_states; ++s2) x += mdp.gamma * mdp.p(s, a, s2) * v[s2];
      q[mdp.sa(s, a)] = x;
    }
  return q;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

/* FNV-1a (64-bit): pins golden output files without committing their bytes. */
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << bytes;
}

}  // namespace fixtures
