#pragma once

#include <algorithm>
#include <vector>

#include "srn/occlusion_mdp.hpp"

namespace srn::testing {

// s0 -> s1 -> s2 (terminal), reward 1 per move, with a second action that
// stays put for reward 0.
inline TabularMdp three_state_chain() {
  TabularMdp m;
  m.num_states = 3;
  m.num_actions = 2;
  m.next = {{1, 0}, {2, 1}, {2, 2}};
  m.rewards = {{1.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}};
  m.terminal = {false, false, true};
  return m;
}

// Q* by repeated Bellman backups until the largest change is below 1e-15.
inline std::vector<std::vector<double>> value_iteration(const TabularMdp& m, double gamma) {
  std::vector<std::vector<double>> q(m.num_states, std::vector<double>(m.num_actions, 0.0));
  for (int it = 0; it < 100000; ++it) {
    double change = 0.0;
    auto next = q;
    for (std::size_t s = 0; s < m.num_states; ++s) {
      if (m.terminal[s]) continue;
      for (std::size_t a = 0; a < m.num_actions; ++a) {
        const std::size_t n = m.next[s][a];
        const double v = m.terminal[n] ? 0.0 : *std::max_element(q[n].begin(), q[n].end());
        next[s][a] = m.rewards[s][a] + gamma * v;
        change = std::max(change, std::abs(next[s][a] - q[s][a]));
      }
    }
    q = std::move(next);
    if (change < 1e-15) break;
  }
  return q;
}

inline double max_abs_gap(const TabularQ& learned, const std::vector<std::vector<double>>& oracle,
                          const TabularMdp& m) {
  double gap = 0.0;
  for (std::size_t s = 0; s < m.num_states; ++s) {
    if (m.terminal[s]) continue;
    for (std::size_t a = 0; a < m.num_actions; ++a) gap = std::max(gap, std::abs(learned.at(s, a) - oracle[s][a]));
  }
  return gap;
}

}  // namespace srn::testing
