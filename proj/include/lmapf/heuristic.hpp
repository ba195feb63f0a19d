#pragma once

#include <cstddef>
#include <functional>
#include <future>
#include <limits>
#include <list>
#include <memory>
#include <mutex>
#include <queue>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lmapf/domain.hpp"
#include "lmapf/guidance.hpp"

namespace lmapf {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline constexpr Orientation reverse(Orientation o) { return static_cast<Orientation>((index_of(o) + 2) % 4); }

// Guidance-weighted cost of the one-step transition from -> to: the move
// weight of the source cell and direction when the location changes, the
// wait weight of the cell otherwise (rotations and waits alike).
inline double step_cost(const GridMap& map, const GuidanceGraph& g, const AgentState& from, const AgentState& to) {
  if (from.location == to.location) return g.wait(from.location);
  auto d = direction_between(map, from.location, to.location);
  return d ? g.move(from.location, *d) : kInfinity;
}

// Minimal guidance-weighted cost from every (location, orientation) state to
// `goal` reached at any orientation. Four-way tables have one slot per cell.
class DistanceTable {
 public:
  DistanceTable(int goal, ActionModel model, int cells)
      : goal_(goal), model_(model), dist_(static_cast<std::size_t>(cells) * slots(model), kInfinity) {}

  int goal() const { return goal_; }
  ActionModel model() const { return model_; }

  double at(int v, Orientation o) const { return dist_[index(v, o)]; }
  double at(const AgentState& s) const { return at(s.location, s.orientation); }

  std::size_t index(int v, Orientation o) const {
    return model_ == ActionModel::Rotation ? static_cast<std::size_t>(v) * 4 + index_of(o) : static_cast<std::size_t>(v);
  }
  std::size_t state_count() const { return dist_.size(); }
  std::size_t bytes() const { return dist_.size() * sizeof(double) + sizeof(*this); }

  std::vector<double>& raw() { return dist_; }
  const std::vector<double>& raw() const { return dist_; }

  static int slots(ActionModel m) { return m == ActionModel::Rotation ? 4 : 1; }

 private:
  int goal_;
  ActionModel model_;
  std::vector<double> dist_;
};

inline double distance(const DistanceTable& table, const AgentState& s) { return table.at(s); }

// Backward Dijkstra from the goal cell over the product state graph. Ties in
// the queue are broken by the smaller state index.
inline DistanceTable build_table(const GridMap& map, const GuidanceGraph& g, int goal, ActionModel model) {
  if (!map.is_free(goal)) throw std::invalid_argument("distance table goal must be a free cell");
  DistanceTable table(goal, model, map.size());
  auto& dist = table.raw();
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const int slots = DistanceTable::slots(model);

  for (int o = 0; o < slots; ++o) {
    std::size_t s = static_cast<std::size_t>(goal) * slots + o;
    dist[s] = 0.0;
    open.emplace(0.0, s);
  }
  auto relax = [&](std::size_t s, double d) {
    if (d < dist[s]) {
      dist[s] = d;
      open.emplace(d, s);
    }
  };

  while (!open.empty()) {
    auto [d, s] = open.top();
    open.pop();
    if (d > dist[s]) continue;
    const int v = static_cast<int>(s / slots);
    if (model == ActionModel::Rotation) {
      const Orientation o = static_cast<Orientation>(s % 4);
      // (v, cw(o)) --CCW--> (v, o) and (v, ccw(o)) --CW--> (v, o)
      relax(table.index(v, clockwise(o)), d + g.wait(v));
      relax(table.index(v, counter_clockwise(o)), d + g.wait(v));
      // (u, o) --Forward--> (v, o) where u is behind v
      if (int u = map.neighbor(v, reverse(o)); u >= 0) relax(table.index(u, o), d + g.move(u, o));
    } else {
      for (Orientation dir : kOrientations)
        if (int u = map.neighbor(v, dir); u >= 0) relax(static_cast<std::size_t>(u), d + g.move(u, reverse(dir)));
    }
  }
  return table;
}

// Get-or-build cache of distance tables keyed by goal, bounded in bytes with
// least-recently-used eviction. A goal's table is built at most once while
// it stays cached, even under concurrent requests.
class HeuristicCache {
 public:
  using TablePtr = std::shared_ptr<const DistanceTable>;

  HeuristicCache(GridMap map, GuidanceGraph guidance, ActionModel model,
                 std::size_t memory_budget = std::size_t{512} << 20)
      : map_(std::move(map)), guidance_(std::move(guidance)), model_(model), budget_(memory_budget) {}

  const GridMap& map() const { return map_; }
  const GuidanceGraph& guidance() const { return guidance_; }
  ActionModel model() const { return model_; }

  TablePtr get(int goal) {
    std::shared_future<TablePtr> pending;
    std::promise<TablePtr> promise;
    {
      std::lock_guard lock(mutex_);
      if (auto it = entries_.find(goal); it != entries_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second.position);
        return it->second.table;
      }
      if (auto it = building_.find(goal); it != building_.end()) {
        pending = it->second;
      } else {
        building_.emplace(goal, promise.get_future().share());
      }
    }
    if (pending.valid()) return pending.get();

    TablePtr table;
    try {
      table = std::make_shared<const DistanceTable>(build_table(map_, guidance_, goal, model_));
    } catch (...) {
      std::lock_guard lock(mutex_);
      promise.set_exception(std::current_exception());
      building_.erase(goal);
      throw;
    }
    {
      std::lock_guard lock(mutex_);
      ++builds_;
      lru_.push_front(goal);
      entries_[goal] = {table, lru_.begin()};
      bytes_ += table->bytes();
      while (bytes_ > budget_ && entries_.size() > 1) {
        int victim = lru_.back();
        lru_.pop_back();
        auto it = entries_.find(victim);
        bytes_ -= it->second.table->bytes();
        entries_.erase(it);
      }
      promise.set_value(table);
      building_.erase(goal);
    }
    return table;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

  std::size_t builds() const {
    std::lock_guard lock(mutex_);
    return builds_;
  }

 private:
  struct Entry {
    TablePtr table;
    std::list<int>::iterator position;
  };

  GridMap map_;
  GuidanceGraph guidance_;
  ActionModel model_;
  std::size_t budget_;

  mutable std::mutex mutex_;
  std::unordered_map<int, Entry> entries_;
  std::unordered_map<int, std::shared_future<TablePtr>> building_;
  std::list<int> lru_;
  std::size_t bytes_ = 0;
  std::size_t builds_ = 0;
};

}  // namespace lmapf
