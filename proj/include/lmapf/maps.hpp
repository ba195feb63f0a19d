#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "lmapf/domain.hpp"
#include "lmapf/rng.hpp"

namespace lmapf {

// Map generators for desk-scale experiments.

// Turns every free cell outside the largest connected component into an obstacle.
inline GridMap keep_largest_component(const GridMap& map) {
  std::vector<int> sizes;
  for (int v = 0; v < map.size(); ++v) {
    int c = map.component(v);
    if (c < 0) continue;
    if (c >= static_cast<int>(sizes.size())) sizes.resize(c + 1, 0);
    ++sizes[c];
  }
  int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<Cell> cells = map.cells();
  for (int v = 0; v < map.size(); ++v)
    if (map.component(v) != best) cells[v] = Cell::Obstacle;
  return GridMap(map.height(), map.width(), std::move(cells));
}

// Uniformly scattered obstacles, then only the largest component is kept.
inline GridMap random_map(int height, int width, double obstacle_ratio, std::uint64_t seed) {
  Rng rng(stream_seed(seed, "map"));
  const int n = height * width;
  std::vector<int> cells(n);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  std::vector<Cell> grid(n, Cell::Free);
  const int blocked = static_cast<int>(obstacle_ratio * n + 0.5);
  for (int i = 0; i < blocked && i < n - 1; ++i) grid[cells[i]] = Cell::Obstacle;
  return keep_largest_component(GridMap(height, width, std::move(grid)));
}

// 33x57 fulfilment-style layout: free 7-column work zones at both sides,
// ten bands of 2-high shelf rows separated by 1-high aisles, each band cut
// into four 10-cell shelves by 1-wide cross aisles. Aisle rows and cross
// aisle columns alternate parity so a crisscross pattern forms loops.
inline GridMap warehouse_map() {
  const int height = 33, width = 57;
  std::vector<Cell> cells(height * width, Cell::Free);
  for (int band = 0; band < 10; ++band) {
    for (int r = 2 + 3 * band; r < 4 + 3 * band; ++r) {
      for (int seg = 0; seg < 4; ++seg) {
        int c0 = 7 + 11 * seg;
        for (int c = c0; c < c0 + 10; ++c) cells[r * width + c] = Cell::Obstacle;
      }
    }
  }
  return GridMap(height, width, std::move(cells));
}

// Distinct uniformly random free start cells. Rotation-model agents get a
// random orientation, four-way agents the fixed East orientation.
inline std::vector<AgentState> random_starts(const GridMap& map, int n, ActionModel model, std::uint64_t seed) {
  if (n < 1 || n > map.free_count()) throw std::invalid_argument("agent count out of range");
  Rng rng(stream_seed(seed, "starts"));
  std::vector<int> free = map.free_cells();
  std::shuffle(free.begin(), free.end(), rng);
  std::vector<AgentState> out;
  out.reserve(n);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int i = 0; i < n; ++i) {
    Orientation o = model == ActionModel::Rotation ? static_cast<Orientation>(pick(rng)) : Orientation::East;
    out.push_back({free[i], o});
  }
  return out;
}

}  // namespace lmapf
