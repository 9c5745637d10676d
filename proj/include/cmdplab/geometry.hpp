#pragma once

/*
 * Projection and mirror-step primitives.
 *
 * These are the geometric kernels shared by every solver: Euclidean
 * projection onto the probability simplex, interval/box clamps, and the
 * multiplicative-weights step with an exact KL-Bregman projection onto the
 * lower-bounded ("restricted") simplex { p : p_i >= eps0/n, sum p = 1 }.
 */

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cmdplab {

/* The restricted simplex: probability vectors with every coordinate >= eps0/n. */
struct RestrictedSimplex {
  int n = 0;
  double eps0 = 0.0;  /* in [0,1); eps0 = 0 gives the plain simplex */

  RestrictedSimplex(int n_, double eps0_) : n(n_), eps0(eps0_) {
    if (n < 1) throw std::invalid_argument("RestrictedSimplex: n must be >= 1");
    if (!(eps0 >= 0.0 && eps0 < 1.0))
      throw std::invalid_argument("RestrictedSimplex: eps0 must lie in [0,1)");
  }
  double floor() const { return eps0 / static_cast<double>(n); }
};

/*
 * Euclidean projection onto the probability simplex by the sorting/threshold
 * method: with v the coordinates sorted in decreasing order, the threshold is
 * theta = (sum_{i<=k} v_i - 1)/k for the largest k keeping v_k above it, and
 * the projection is max(x - theta, 0).  Sorting ties are broken by coordinate
 * index so results are identical across platforms.
 */
inline std::vector<double> project_simplex(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("project_simplex: empty input");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("project_simplex: non-finite input");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&x](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] > x[b];
    return a < b;
  });

  double cum = 0.0;
  double theta = 0.0;
  std::size_t support = 0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += x[idx[k]];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (x[idx[k]] - t > 0.0) {
      theta = t;
      support = k + 1;
    }
  }
  /* support >= 1 always: for k = 1 the test reads (x_max + 1 - x_max)/1 > 0. */
  (void)support;

  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(x[i] - theta, 0.0);
  return p;
}

inline double project_interval(double x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("project_interval: lo > hi");
  return std::min(std::max(x, lo), hi);
}

inline std::vector<double> project_box(const std::vector<double>& x, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("project_box: lo > hi");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::min(std::max(x[i], lo), hi);
  return out;
}

/*
 * Exact minimizer of KL(p, q) over the restricted simplex.
 *
 * KKT structure: unpinned coordinates are a common rescale c*q_i; a coordinate
 * is pinned at the floor exactly when c*q_i would fall below it.  Sorting q
 * ascending, the pinned set is a prefix, so a single scan over the prefix
 * length k finds the unique valid configuration:
 *   c_k = (1 - k*floor) / (sum of unpinned q),
 *   valid iff c_k*q_(k+1) >= floor (smallest unpinned stays up) and
 *             c_k*q_(k)   <= floor (largest pinned belongs down).
 * The input may be unnormalized (any positive total); c absorbs the scale.
 */
inline std::vector<double> kl_bregman_project(const std::vector<double>& q,
                                              const RestrictedSimplex& set) {
  const std::size_t n = q.size();
  if (n != static_cast<std::size_t>(set.n))
    throw std::invalid_argument("kl_bregman_project: dimension mismatch");
  for (double v : q)
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument("kl_bregman_project: entries must be strictly positive");

  const double floor = set.floor();
  if (floor == 0.0) {
    const double total = std::accumulate(q.begin(), q.end(), 0.0);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = q[i] / total;
    return p;
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&q](std::size_t a, std::size_t b) {
    if (q[a] != q[b]) return q[a] < q[b];
    return a < b;
  });

  /* suffix[k] = sum of q over the n-k largest coordinates (the unpinned set). */
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] + q[idx[k]];

  for (std::size_t k = 0; k < n; ++k) {
    const double c = (1.0 - static_cast<double>(k) * floor) / suffix[k];
    const bool smallest_unpinned_ok = c * q[idx[k]] >= floor;
    const bool largest_pinned_ok = (k == 0) || (c * q[idx[k - 1]] <= floor);
    if (smallest_unpinned_ok && largest_pinned_ok) {
      std::vector<double> p(n);
      for (std::size_t j = 0; j < k; ++j) p[idx[j]] = floor;
      for (std::size_t j = k; j < n; ++j) p[idx[j]] = c * q[idx[j]];
      return p;
    }
  }
  /* Unreachable for eps0 < 1: pinning all but the largest always validates. */
  throw std::logic_error("kl_bregman_project: no KKT configuration found");
}

/*
 * Multiplicative-weights ascent step followed by the exact restricted-simplex
 * projection.  Computed in the log domain (log pi + eta*grad, max-subtracted
 * before exponentiation) so soft-Q magnitudes on the order of tau*|log eps0|
 * cannot overflow.  Weights that underflow to zero after max-subtraction are
 * raised to DBL_MIN: the true MWU weight is strictly positive, and the
 * smallest positive double is its closest representable value.
 */
inline std::vector<double> mwu_step(const std::vector<double>& pi_row,
                                    const std::vector<double>& grad, double eta,
                                    const RestrictedSimplex& set) {
  const std::size_t n = pi_row.size();
  if (grad.size() != n) throw std::invalid_argument("mwu_step: dimension mismatch");
  std::vector<double> logw(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(pi_row[i] > 0.0))
      throw std::invalid_argument("mwu_step: policy row must be strictly positive");
    if (!std::isfinite(grad[i])) throw std::invalid_argument("mwu_step: non-finite gradient");
    logw[i] = std::log(pi_row[i]) + eta * grad[i];
  }
  const double m = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::max(std::exp(logw[i] - m), DBL_MIN);
  return kl_bregman_project(w, set);
}

/* Projected (Euclidean) gradient-ascent step on a probability row. */
inline std::vector<double> euclid_ascent_step(const std::vector<double>& pi_row,
                                              const std::vector<double>& grad, double eta) {
  if (grad.size() != pi_row.size())
    throw std::invalid_argument("euclid_ascent_step: dimension mismatch");
  std::vector<double> y(pi_row.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = pi_row[i] + eta * grad[i];
  return project_simplex(y);
}

/*
 * KL divergence sum_i p_i log(p_i/q_i) with the conventions 0 log 0 = 0 and
 * p_i > 0, q_i = 0 => +infinity.  Used by the convergence diagnostics.
 */
inline double kl_div(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_div: dimension mismatch");
  double out = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    out += p[i] * std::log(p[i] / q[i]);
  }
  return out;
}

}  // namespace cmdplab
