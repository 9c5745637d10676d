#pragma once

/*
 * Seeded random model generation for the experiment protocol: transition
 * rows are i.i.d. uniform entries normalized per (s,a) row, rewards are
 * uniform on [0,1], and the signed constraint signal is uniform on [-1,1]
 * (raw-g mode, threshold folded to zero).  The initial distribution is
 * uniform.
 *
 * The draw order is part of the format and must never change: all
 * transition rows first (row-major over (s,a), one uniform per successor
 * state), then all rewards, then all constraint signals.  Reordering would
 * silently invalidate every frozen golden fixture.
 */

#include <cstdint>
#include <vector>

#include "cmdplab/cmdp.hpp"
#include "cmdplab/rng.hpp"

namespace cmdplab {

inline Cmdp gen_random_cmdp(int n_states, int n_actions, double gamma, std::uint64_t seed) {
  if (n_states < 1 || n_actions < 1)
    throw std::invalid_argument("gen_random_cmdp: sizes must be >= 1");
  Rng rng(seed);
  const std::size_t n_sa = static_cast<std::size_t>(n_states) * n_actions;

  std::vector<double> transition(n_sa * n_states);
  for (std::size_t row = 0; row < n_sa; ++row) {
    double total = 0.0;
    for (int s2 = 0; s2 < n_states; ++s2) {
      const double w = rng.uniform01();
      transition[row * n_states + s2] = w;
      total += w;
    }
    if (total > 0.0) {
      for (int s2 = 0; s2 < n_states; ++s2) transition[row * n_states + s2] /= total;
    } else {
      /* probability-zero draw of an all-zero row: fall back to uniform */
      for (int s2 = 0; s2 < n_states; ++s2)
        transition[row * n_states + s2] = 1.0 / static_cast<double>(n_states);
    }
  }

  std::vector<double> reward(n_sa);
  for (std::size_t i = 0; i < n_sa; ++i) reward[i] = rng.uniform01();

  std::vector<double> g_signal(n_sa);
  for (std::size_t i = 0; i < n_sa; ++i) g_signal[i] = rng.uniform(-1.0, 1.0);

  const std::vector<double> rho(n_states, 1.0 / static_cast<double>(n_states));
  return Cmdp::raw_g(n_states, n_actions, std::move(transition), std::move(reward),
                     std::move(g_signal), gamma, rho);
}

}  // namespace cmdplab
