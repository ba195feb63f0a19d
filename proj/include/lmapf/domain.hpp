#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmapf/errors.hpp"

namespace lmapf {

// Clockwise order. Vertex ids are row-major; East = +col, South = +row.
enum class Orientation : std::uint8_t { East = 0, South = 1, West = 2, North = 3 };

inline constexpr std::array<Orientation, 4> kOrientations = {Orientation::East, Orientation::South,
                                                             Orientation::West, Orientation::North};

inline constexpr int index_of(Orientation o) { return static_cast<int>(o); }
inline constexpr Orientation clockwise(Orientation o) { return static_cast<Orientation>((index_of(o) + 1) % 4); }
inline constexpr Orientation counter_clockwise(Orientation o) {
  return static_cast<Orientation>((index_of(o) + 3) % 4);
}
inline constexpr int row_delta(Orientation o) { return o == Orientation::South ? 1 : o == Orientation::North ? -1 : 0; }
inline constexpr int col_delta(Orientation o) { return o == Orientation::East ? 1 : o == Orientation::West ? -1 : 0; }

inline char to_char(Orientation o) { return "ESWN"[index_of(o)]; }

inline std::optional<Orientation> orientation_from_char(char c) {
  switch (c) {
    case 'E': return Orientation::East;
    case 'S': return Orientation::South;
    case 'W': return Orientation::West;
    case 'N': return Orientation::North;
    default: return std::nullopt;
  }
}

enum class Cell : std::uint8_t { Free, Obstacle };

enum class ActionModel : std::uint8_t { Rotation, FourWay };

inline const char* to_string(ActionModel m) { return m == ActionModel::Rotation ? "rotation" : "fourway"; }

class GridMap {
 public:
  GridMap(int height, int width, std::vector<Cell> cells) : height_(height), width_(width), cells_(std::move(cells)) {
    if (height_ < 1 || width_ < 1) throw std::invalid_argument("grid map dimensions must be positive");
    if (cells_.size() != static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_))
      throw std::invalid_argument("grid map cell count does not match dimensions");
    free_count_ = static_cast<int>(std::count(cells_.begin(), cells_.end(), Cell::Free));
    if (free_count_ < 1) throw std::invalid_argument("grid map has no free cell");
    build_adjacency();
    label_components();
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int size() const { return height_ * width_; }
  int free_count() const { return free_count_; }

  int vertex(int row, int col) const { return row * width_ + col; }
  int row(int v) const { return v / width_; }
  int col(int v) const { return v % width_; }
  bool in_bounds(int row, int col) const { return row >= 0 && row < height_ && col >= 0 && col < width_; }
  bool is_free(int v) const { return v >= 0 && v < size() && cells_[v] == Cell::Free; }
  bool is_free(int row, int col) const { return in_bounds(row, col) && cells_[vertex(row, col)] == Cell::Free; }
  Cell cell(int v) const { return cells_[v]; }
  const std::vector<Cell>& cells() const { return cells_; }

  // Free cell adjacent to v in direction d, or -1.
  int neighbor(int v, Orientation d) const { return adjacency_[v][index_of(d)]; }

  int degree(int v) const {
    int n = 0;
    for (int u : adjacency_[v]) n += u >= 0;
    return n;
  }

  bool is_deadend(int v) const { return is_free(v) && degree(v) == 1; }

  // Connected-component label of a free cell (-1 for obstacles).
  int component(int v) const { return component_[v]; }

  std::vector<int> free_cells() const {
    std::vector<int> out;
    out.reserve(free_count_);
    for (int v = 0; v < size(); ++v)
      if (cells_[v] == Cell::Free) out.push_back(v);
    return out;
  }

  bool operator==(const GridMap& other) const {
    return height_ == other.height_ && width_ == other.width_ && cells_ == other.cells_;
  }

 private:
  void build_adjacency() {
    adjacency_.assign(size(), {-1, -1, -1, -1});
    for (int v = 0; v < size(); ++v) {
      if (cells_[v] != Cell::Free) continue;
      for (Orientation d : kOrientations) {
        int r = row(v) + row_delta(d), c = col(v) + col_delta(d);
        if (is_free(r, c)) adjacency_[v][index_of(d)] = vertex(r, c);
      }
    }
  }

  void label_components() {
    component_.assign(size(), -1);
    int label = 0;
    std::vector<int> stack;
    for (int s = 0; s < size(); ++s) {
      if (cells_[s] != Cell::Free || component_[s] >= 0) continue;
      component_[s] = label;
      stack.push_back(s);
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int u : adjacency_[v]) {
          if (u >= 0 && component_[u] < 0) {
            component_[u] = label;
            stack.push_back(u);
          }
        }
      }
      ++label;
    }
  }

  int height_;
  int width_;
  std::vector<Cell> cells_;
  int free_count_ = 0;
  std::vector<std::array<int, 4>> adjacency_;
  std::vector<int> component_;
};

struct AgentState {
  int location = 0;
  Orientation orientation = Orientation::East;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

// Forward/RotateCW/RotateCCW/Wait form the rotation alphabet. The four-way
// model reuses Wait and adds absolute moves; its agents keep a fixed East
// orientation so every downstream module stays model-generic.
enum class Action : std::uint8_t { Forward, RotateCW, RotateCCW, Wait, MoveEast, MoveSouth, MoveWest, MoveNorth };

inline constexpr Action move_action(Orientation d) { return static_cast<Action>(4 + index_of(d)); }
inline constexpr bool is_move(Action a) { return static_cast<int>(a) >= 4; }
inline constexpr Orientation move_direction(Action a) { return static_cast<Orientation>(static_cast<int>(a) - 4); }

inline const char* to_string(Action a) {
  static constexpr const char* names[] = {"Forward", "RotateCW", "RotateCCW", "Wait",
                                          "MoveEast", "MoveSouth", "MoveWest", "MoveNorth"};
  return names[static_cast<int>(a)];
}

inline AgentState apply_action(const GridMap& map, const AgentState& s, Action a) {
  switch (a) {
    case Action::Wait: return s;
    case Action::RotateCW: return {s.location, clockwise(s.orientation)};
    case Action::RotateCCW: return {s.location, counter_clockwise(s.orientation)};
    case Action::Forward: {
      int u = map.neighbor(s.location, s.orientation);
      if (u < 0)
        throw IllegalForward("forward from (" + std::to_string(map.row(s.location)) + "," +
                             std::to_string(map.col(s.location)) + ") facing " + to_char(s.orientation) +
                             " leaves the free space");
      return {u, s.orientation};
    }
    default: {
      int u = map.neighbor(s.location, move_direction(a));
      if (u < 0)
        throw IllegalForward("move " + std::string(1, to_char(move_direction(a))) + " from (" +
                             std::to_string(map.row(s.location)) + "," + std::to_string(map.col(s.location)) +
                             ") leaves the free space");
      return {u, s.orientation};
    }
  }
}

struct Transition {
  Action action;
  AgentState next;
};

// Fixed-capacity successor list; at most five one-step transitions in either model.
class Successors {
 public:
  void push(Action a, AgentState s) { items_[count_++] = {a, s}; }
  const Transition* begin() const { return items_.data(); }
  const Transition* end() const { return items_.data() + count_; }
  int size() const { return count_; }

 private:
  std::array<Transition, 5> items_{};
  int count_ = 0;
};

inline Successors successors(const GridMap& map, const AgentState& s, ActionModel model) {
  Successors out;
  if (model == ActionModel::Rotation) {
    if (int u = map.neighbor(s.location, s.orientation); u >= 0) out.push(Action::Forward, {u, s.orientation});
    out.push(Action::RotateCW, {s.location, clockwise(s.orientation)});
    out.push(Action::RotateCCW, {s.location, counter_clockwise(s.orientation)});
    out.push(Action::Wait, s);
  } else {
    for (Orientation d : kOrientations)
      if (int u = map.neighbor(s.location, d); u >= 0) out.push(move_action(d), {u, s.orientation});
    out.push(Action::Wait, s);
  }
  return out;
}

// The action that turns `from` into `to` in one step, if any.
inline std::optional<Action> action_between(const GridMap& map, const AgentState& from, const AgentState& to,
                                            ActionModel model) {
  for (const auto& t : successors(map, from, model))
    if (t.next == to) return t.action;
  return std::nullopt;
}

// Direction of the edge u -> v between adjacent cells, if adjacent.
inline std::optional<Orientation> direction_between(const GridMap& map, int u, int v) {
  for (Orientation d : kOrientations)
    if (map.neighbor(u, d) == v) return d;
  return std::nullopt;
}

// Shortest rotation sequence; the 180 degree tie is two clockwise turns.
inline std::vector<Action> turn_toward(Orientation o, Orientation target) {
  switch ((index_of(target) - index_of(o) + 4) % 4) {
    case 0: return {};
    case 1: return {Action::RotateCW};
    case 2: return {Action::RotateCW, Action::RotateCW};
    default: return {Action::RotateCCW};
  }
}

enum class ConflictKind : std::uint8_t { Vertex, Swap };

struct Conflict {
  ConflictKind kind;
  int agent_a;  // agent_a < agent_b
  int agent_b;
  int step;
  int vertex = -1;  // Vertex conflicts
  int from = -1;    // Swap conflicts: agent_a traverses from -> to
  int to = -1;

  friend bool operator==(const Conflict&, const Conflict&) = default;
};

// All vertex and swap conflicts of the joint step before -> after. Following
// into a cell vacated in the same step is allowed.
inline std::vector<Conflict> check_joint_step(const std::vector<AgentState>& before,
                                              const std::vector<AgentState>& after, int step = 0) {
  if (before.size() != after.size()) throw std::invalid_argument("joint step length mismatch");
  const int n = static_cast<int>(before.size());
  std::vector<Conflict> conflicts;

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return after[a].location != after[b].location ? after[a].location < after[b].location : a < b;
  });
  for (int lo = 0; lo < n;) {
    int hi = lo + 1;
    while (hi < n && after[order[hi]].location == after[order[lo]].location) ++hi;
    for (int x = lo; x < hi; ++x)
      for (int y = x + 1; y < hi; ++y)
        conflicts.push_back({ConflictKind::Vertex, order[x], order[y], step, after[order[x]].location});
    lo = hi;
  }

  std::unordered_map<int, int> occupant;
  occupant.reserve(n * 2);
  for (int i = 0; i < n; ++i) occupant.emplace(before[i].location, i);
  for (int i = 0; i < n; ++i) {
    if (after[i].location == before[i].location) continue;
    auto it = occupant.find(after[i].location);
    if (it == occupant.end()) continue;
    int j = it->second;
    if (j > i && after[j].location == before[i].location)
      conflicts.push_back({ConflictKind::Swap, i, j, step, -1, before[i].location, after[i].location});
  }
  return conflicts;
}

inline std::string describe(const GridMap& map, const Conflict& c) {
  auto cell = [&](int v) { return "(" + std::to_string(map.row(v)) + "," + std::to_string(map.col(v)) + ")"; };
  if (c.kind == ConflictKind::Vertex)
    return "vertex conflict between agents " + std::to_string(c.agent_a) + " and " + std::to_string(c.agent_b) +
           " at " + cell(c.vertex);
  return "swap conflict between agents " + std::to_string(c.agent_a) + " and " + std::to_string(c.agent_b) +
         " on edge " + cell(c.from) + "-" + cell(c.to);
}

struct Instance {
  GridMap map;
  std::vector<AgentState> starts;
  ActionModel model = ActionModel::Rotation;

  int agent_count() const { return static_cast<int>(starts.size()); }
  double density() const { return static_cast<double>(starts.size()) / map.free_count(); }

  void validate() const {
    if (starts.empty()) throw std::invalid_argument("instance has no agents");
    if (starts.size() > static_cast<std::size_t>(map.free_count()))
      throw std::invalid_argument("more agents than free cells");
    std::vector<char> seen(map.size(), 0);
    for (std::size_t i = 0; i < starts.size(); ++i) {
      int v = starts[i].location;
      if (!map.is_free(v)) throw std::invalid_argument("agent " + std::to_string(i) + " starts on a blocked cell");
      if (seen[v]) throw std::invalid_argument("agent " + std::to_string(i) + " shares its start cell");
      seen[v] = 1;
      if (model == ActionModel::FourWay && starts[i].orientation != Orientation::East)
        throw std::invalid_argument("four-way agents carry the fixed East orientation");
    }
  }
};

}  // namespace lmapf
