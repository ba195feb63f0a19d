#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "lmapf/domain.hpp"
#include "lmapf/guidance.hpp"
#include "lmapf/heuristic.hpp"

namespace lmapf::testing {

// Rows of '.' (free) and '@' (obstacle).
inline GridMap grid(const std::vector<std::string>& rows) {
  std::vector<Cell> cells;
  for (const auto& r : rows)
    for (char ch : r) cells.push_back(ch == '.' ? Cell::Free : Cell::Obstacle);
  return GridMap(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()), std::move(cells));
}

inline GridMap open_grid(int h, int w) { return GridMap(h, w, std::vector<Cell>(static_cast<std::size_t>(h) * w, Cell::Free)); }

inline AgentState at(const GridMap& m, int r, int c, Orientation o = Orientation::East) { return {m.vertex(r, c), o}; }

// Small random map; every free cell kept even when disconnected.
inline GridMap random_small_map(std::mt19937_64& rng, int max_side = 10, double max_obstacles = 0.4) {
  std::uniform_int_distribution<int> side(1, max_side);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    const int h = side(rng), w = side(rng);
    const double p = unit(rng) * max_obstacles;
    std::vector<Cell> cells(static_cast<std::size_t>(h) * w);
    int free = 0;
    for (auto& c : cells) {
      c = unit(rng) < p ? Cell::Obstacle : Cell::Free;
      free += c == Cell::Free;
    }
    if (free > 0) return GridMap(h, w, std::move(cells));
  }
}

// Weights drawn from {0.25, 0.5, ..., 2.0}: exact in binary, so sums are exact.
inline GuidanceGraph random_guidance(const GridMap& map, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> q(1, 8);
  GuidanceGraph g(map);
  for (int v = 0; v < map.size(); ++v) {
    if (!map.is_free(v)) continue;
    g.set_wait(v, q(rng) * 0.25);
    for (Orientation d : kOrientations)
      if (map.neighbor(v, d) >= 0) g.set_move(v, d, q(rng) * 0.25);
  }
  return g;
}

// Independent oracle: Bellman-Ford relaxation to a fixed point over every
// (cell, orientation) state using only successors() and step_cost().
inline std::vector<double> bellman_ford_oracle(const GridMap& map, const GuidanceGraph& g, int goal,
                                               ActionModel model) {
  const int slots = model == ActionModel::Rotation ? 4 : 1;
  std::vector<double> d(static_cast<std::size_t>(map.size()) * slots, std::numeric_limits<double>::infinity());
  auto idx = [&](const AgentState& s) { return static_cast<std::size_t>(s.location) * slots + (slots == 4 ? index_of(s.orientation) : 0); };
  for (int o = 0; o < slots; ++o) d[static_cast<std::size_t>(goal) * slots + o] = 0.0;
  for (bool changed = true; changed;) {
    changed = false;
    for (int v = 0; v < map.size(); ++v) {
      if (!map.is_free(v) || v == goal) continue;
      for (int o = 0; o < slots; ++o) {
        AgentState s{v, static_cast<Orientation>(o)};
        double best = d[idx(s)];
        for (const auto& t : successors(map, s, model)) {
          if (t.next == s) continue;
          best = std::min(best, step_cost(map, g, s, t.next) + d[idx(t.next)]);
        }
        if (best < d[idx(s)]) {
          d[idx(s)] = best;
          changed = true;
        }
      }
    }
  }
  return d;
}

}  // namespace lmapf::testing
