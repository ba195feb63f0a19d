#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "lmapf/domain.hpp"
#include "lmapf/plan.hpp"
#include "lmapf/rng.hpp"

namespace lmapf {

// Strict-improvement threshold for floating-point objective comparisons.
inline constexpr double kImprovementEpsilon = 1e-9;

struct Budget {
  std::int64_t iterations = 0;  // < 0: unlimited (a deadline must be set)
  std::optional<std::chrono::steady_clock::time_point> deadline;

  static Budget of_iterations(std::int64_t n) { return {n, std::nullopt}; }
  static Budget until(std::chrono::steady_clock::time_point t) { return {-1, t}; }

  bool exhausted(std::int64_t done) const {
    if (iterations >= 0 && done >= iterations) return true;
    return deadline && std::chrono::steady_clock::now() >= *deadline;
  }
};

enum class NeighborhoodStrategy : std::uint8_t { Random, AgentBased };

struct Neighborhood {
  std::vector<int> members;
  NeighborhoodStrategy strategy = NeighborhoodStrategy::Random;
};

struct CommitEntry {
  std::int64_t iteration = 0;
  int worker = 0;
  std::vector<int> members;
  double before = 0.0;  // incumbent objective when the proposal was judged
  double after = 0.0;   // objective with the proposal applied (infinite when replanning failed)
  bool accepted = false;
};

using CommitLog = std::vector<CommitEntry>;

struct LnsOptions {
  int neighborhood_size = 8;
};

// Space-time occupancy of fixed paths over steps 0..window. Edge entries are
// keyed by (source cell, direction, arrival step).
class ReservationTable {
 public:
  ReservationTable(int cells, int window)
      : cells_(cells),
        window_(window),
        vertex_(static_cast<std::size_t>(window + 1) * cells, -1),
        edge_(static_cast<std::size_t>(window + 1) * cells * 4, -1) {}

  static ReservationTable build(const GridMap& map, const WindowedPlan& plan, const std::vector<int>& excluded = {}) {
    ReservationTable table(map.size(), plan.window);
    std::vector<char> skip(plan.agent_count(), 0);
    for (int i : excluded) skip[i] = 1;
    for (int i = 0; i < plan.agent_count(); ++i)
      if (!skip[i]) table.add(map, i, plan.paths[i]);
    return table;
  }

  int window() const { return window_; }

  int vertex_owner(int v, int t) const { return vertex_[static_cast<std::size_t>(t) * cells_ + v]; }
  int edge_owner(int from, Orientation d, int t) const { return edge_[edge_index(from, d, t)]; }

  void add(const GridMap& map, int agent, const Path& path) { write(map, path, agent, -1); }
  void remove(const GridMap& map, int agent, const Path& path) { write(map, path, -1, agent); }

  // Whether the transition from -> to arriving at step t collides with a
  // reserved vertex or traverses a reserved edge in the opposite direction.
  bool blocked(const GridMap& map, const AgentState& from, const AgentState& to, int t) const {
    if (vertex_owner(to.location, t) != -1) return true;
    if (from.location == to.location) return false;
    auto d = direction_between(map, from.location, to.location);
    return edge_owner(to.location, reverse(*d), t) != -1;
  }

  friend bool operator==(const ReservationTable&, const ReservationTable&) = default;

 private:
  std::size_t edge_index(int from, Orientation d, int t) const {
    return (static_cast<std::size_t>(t) * cells_ + from) * 4 + index_of(d);
  }

  void write(const GridMap& map, const Path& path, int value, int expected) {
    const int last = std::min<int>(window_, static_cast<int>(path.size()) - 1);
    for (int t = 0; t <= last; ++t) {
      int& slot = vertex_[static_cast<std::size_t>(t) * cells_ + path[t].location];
      if (slot == expected) slot = value;
      if (t > 0 && path[t].location != path[t - 1].location) {
        auto d = direction_between(map, path[t - 1].location, path[t].location);
        int& e = edge_[edge_index(path[t - 1].location, *d, t)];
        if (e == expected) e = value;
      }
    }
  }

  int cells_;
  int window_;
  std::vector<int> vertex_;
  std::vector<int> edge_;
};

// Windowed space-time A* over (location, orientation, step, arrived). Path
// cost follows agent_cost: weighted step costs until the first goal arrival,
// zero afterwards, plus the table distance at the window end if the goal was
// never reached. Open-list ties prefer lower h, then the lower state index.
class SpaceTimeAStar {
 public:
  SpaceTimeAStar(const GridMap& map, int window)
      : map_(&map),
        window_(window),
        best_g_(key_space(map, window), 0.0),
        stamp_(key_space(map, window), 0) {}

  std::int64_t expansions() const { return expansions_; }

  std::optional<Path> search(const PlanningContext& ctx, int agent, const AgentState& start,
                             const ReservationTable& reservations) {
    if (++generation_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      generation_ = 1;
    }
    nodes_.clear();
    open_ = {};
    const int goal = ctx.goals[agent];
    const DistanceTable& table = ctx.table(agent);
    const GuidanceGraph& guidance = *ctx.guidance;

    auto push = [&](const AgentState& s, int t, bool arrived, double g, int parent) {
      const std::size_t key = key_of(s, t, arrived);
      if (stamp_[key] == generation_ && best_g_[key] <= g) return;
      stamp_[key] = generation_;
      best_g_[key] = g;
      const double h = arrived ? 0.0 : table.at(s);
      if (h == kInfinity) return;
      nodes_.push_back({s, t, arrived, g, h, parent});
      open_.push({g + h, h, key, static_cast<int>(nodes_.size()) - 1});
    };

    push(start, 0, start.location == goal, 0.0, -1);
    while (!open_.empty()) {
      const OpenEntry top = open_.top();
      open_.pop();
      const Node node = nodes_[top.node];
      if (best_g_[top.key] < node.g) continue;
      if (node.t == window_) return reconstruct(top.node);
      ++expansions_;
      for (const auto& tr : successors(*map_, node.state, ctx.model)) {
        if (reservations.blocked(*map_, node.state, tr.next, node.t + 1)) continue;
        const bool arrived = node.arrived || tr.next.location == goal;
        const double cost = node.arrived ? 0.0 : step_cost(*map_, guidance, node.state, tr.next);
        push(tr.next, node.t + 1, arrived, node.g + cost, top.node);
      }
    }
    return std::nullopt;
  }

 private:
  struct Node {
    AgentState state;
    int t;
    bool arrived;
    double g;
    double h;
    int parent;
  };

  struct OpenEntry {
    double f;
    double h;
    std::size_t key;
    int node;
    bool operator>(const OpenEntry& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return key > o.key;
    }
  };

  static std::size_t key_space(const GridMap& map, int window) {
    return static_cast<std::size_t>(window + 1) * map.size() * 8;
  }

  std::size_t key_of(const AgentState& s, int t, bool arrived) const {
    return ((static_cast<std::size_t>(t) * map_->size() + s.location) * 4 + index_of(s.orientation)) * 2 + arrived;
  }

  Path reconstruct(int node) const {
    Path path(window_ + 1);
    for (int i = node; i != -1; i = nodes_[i].parent) path[nodes_[i].t] = nodes_[i].state;
    return path;
  }

  const GridMap* map_;
  int window_;
  std::vector<double> best_g_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
  std::vector<Node> nodes_;
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>> open_;
  std::int64_t expansions_ = 0;
};

// `tabu` (optional, caller-owned) remembers AgentBased seeds already tried;
// it is cleared once every eligible seed is tabu.
inline Neighborhood select_neighborhood(const WindowedPlan& plan, const PlanningContext& ctx, Rng& rng,
                                        NeighborhoodStrategy strategy, int size = 8,
                                        std::vector<char>* tabu = nullptr) {
  const int n = plan.agent_count();
  const int k = std::clamp(size, 1, n);
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);

  auto sample_into = [&](std::vector<int>& out, std::vector<int> pool) {
    for (int i = 0; static_cast<int>(out.size()) < k && i < static_cast<int>(pool.size()); ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
  };

  if (strategy == NeighborhoodStrategy::AgentBased) {
    auto pick_seed = [&]() {
      int seed = -1;
      double best = kImprovementEpsilon;
      for (int i = 0; i < n; ++i) {
        if (ctx.is_disabled(i) || (tabu && (*tabu)[i])) continue;
        const double delay = plan.costs[i] - distance(ctx.table(i), plan.paths[i].front());
        if (delay > best) {
          best = delay;
          seed = i;
        }
      }
      return seed;
    };
    int seed = pick_seed();
    if (seed < 0 && tabu && std::find(tabu->begin(), tabu->end(), 1) != tabu->end()) {
      std::fill(tabu->begin(), tabu->end(), 0);
      seed = pick_seed();
    }
    if (seed >= 0) {
      if (tabu) (*tabu)[seed] = 1;
      std::vector<char> on_seed_path(ctx.map->size(), 0);
      for (const auto& s : plan.paths[seed]) on_seed_path[s.location] = 1;
      std::vector<int> crossing, others;
      for (int i = 0; i < n; ++i) {
        if (i == seed) continue;
        bool hit = std::any_of(plan.paths[i].begin(), plan.paths[i].end(),
                               [&](const AgentState& s) { return on_seed_path[s.location] != 0; });
        (hit ? crossing : others).push_back(i);
      }
      Neighborhood nb{{seed}, NeighborhoodStrategy::AgentBased};
      sample_into(nb.members, std::move(crossing));
      sample_into(nb.members, std::move(others));
      return nb;
    }
  }
  Neighborhood nb{{}, NeighborhoodStrategy::Random};
  sample_into(nb.members, std::move(ids));
  return nb;
}

// Prioritized replanning of the neighborhood against `reservations`, which
// must hold every non-member path. Enabled members go first in random order,
// then disabled members. The table is left as it was passed in.
inline std::optional<std::vector<Path>> replan_neighborhood(const WindowedPlan& plan, const Neighborhood& nbhd,
                                                            const PlanningContext& ctx,
                                                            ReservationTable& reservations, Rng& rng,
                                                            SpaceTimeAStar& astar) {
  std::vector<int> order = nbhd.members;
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_partition(order.begin(), order.end(), [&](int a) { return !ctx.is_disabled(a); });

  std::vector<std::pair<int, Path>> planned;
  planned.reserve(order.size());
  bool ok = true;
  for (int a : order) {
    auto path = astar.search(ctx, a, plan.paths[a].front(), reservations);
    if (!path) {
      ok = false;
      break;
    }
    reservations.add(*ctx.map, a, *path);
    planned.emplace_back(a, std::move(*path));
  }
  for (const auto& [a, path] : planned) reservations.remove(*ctx.map, a, path);
  if (!ok) return std::nullopt;

  std::vector<Path> out(nbhd.members.size());
  for (auto& [a, path] : planned) {
    auto pos = std::find(nbhd.members.begin(), nbhd.members.end(), a) - nbhd.members.begin();
    out[pos] = std::move(path);
  }
  return out;
}

namespace detail {

inline NeighborhoodStrategy draw_strategy(Rng& rng) {
  return std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? NeighborhoodStrategy::Random
                                                            : NeighborhoodStrategy::AgentBased;
}

}  // namespace detail

// Anytime refinement: select, replan, keep strictly improving replacements.
inline WindowedPlan lns_refine(WindowedPlan plan, const PlanningContext& ctx, const Budget& budget, Rng& rng,
                               const LnsOptions& options = {}, CommitLog* log = nullptr, int worker = 0) {
  if (plan.agent_count() == 0 || budget.exhausted(0)) return plan;
  ReservationTable reservations = ReservationTable::build(*ctx.map, plan);
  SpaceTimeAStar astar(*ctx.map, plan.window);
  std::vector<char> tabu(plan.agent_count(), 0);

  for (std::int64_t iter = 0; !budget.exhausted(iter); ++iter) {
    Neighborhood nbhd =
        select_neighborhood(plan, ctx, rng, detail::draw_strategy(rng), options.neighborhood_size, &tabu);
    for (int a : nbhd.members) reservations.remove(*ctx.map, a, plan.paths[a]);
    auto replacement = replan_neighborhood(plan, nbhd, ctx, reservations, rng, astar);

    double old_sum = 0.0, new_sum = 0.0;
    for (int a : nbhd.members) old_sum += plan.costs[a];
    std::vector<double> new_costs;
    if (replacement) {
      for (std::size_t m = 0; m < nbhd.members.size(); ++m) {
        new_costs.push_back(agent_cost(ctx, nbhd.members[m], (*replacement)[m]));
        new_sum += new_costs.back();
      }
    }
    const double before = plan.objective;
    const bool accept = replacement && new_sum + kImprovementEpsilon < old_sum;
    if (accept) {
      for (std::size_t m = 0; m < nbhd.members.size(); ++m) {
        const int a = nbhd.members[m];
        plan.paths[a] = std::move((*replacement)[m]);
        plan.costs[a] = new_costs[m];
      }
      plan.refresh_objective();
    }
    for (int a : nbhd.members) reservations.add(*ctx.map, a, plan.paths[a]);
    if (log) {
      const double after = replacement ? before - old_sum + new_sum : kInfinity;
      log->push_back({iter, worker, nbhd.members, before, accept ? plan.objective : after, accept});
    }
  }
  return plan;
}

}  // namespace lmapf
