#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lmapf/domain.hpp"
#include "lmapf/plan.hpp"
#include "lmapf/rng.hpp"

namespace lmapf {

// Effective priority is elapsed + tiebreak for enabled agents and
// -1 - tiebreak for disabled ones, so every disabled agent ranks below every
// enabled agent.
struct PriorityState {
  std::vector<int> elapsed;
  std::vector<double> tiebreak;  // distinct values in [0, 1)
  std::vector<char> disabled;

  static PriorityState initial(int n, std::uint64_t seed) {
    PriorityState p;
    p.elapsed.assign(n, 0);
    p.disabled.assign(n, 0);
    p.tiebreak.resize(n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(stream_seed(seed, "tiebreak"));
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < n; ++i) p.tiebreak[order[i]] = static_cast<double>(i) / n;
    return p;
  }

  int agent_count() const { return static_cast<int>(elapsed.size()); }

  double effective(int i) const { return disabled[i] ? -1.0 - tiebreak[i] : elapsed[i] + tiebreak[i]; }

  // Agent ids by decreasing effective priority.
  std::vector<int> order() const {
    std::vector<int> ids(elapsed.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::sort(ids.begin(), ids.end(), [&](int a, int b) { return effective(a) > effective(b); });
    return ids;
  }
};

inline PriorityState update_priorities(PriorityState p, const std::vector<int>& reached) {
  std::vector<char> hit(p.elapsed.size(), 0);
  for (int i : reached) hit[i] = 1;
  for (std::size_t i = 0; i < p.elapsed.size(); ++i) p.elapsed[i] = hit[i] ? 0 : p.elapsed[i] + 1;
  return p;
}

struct StepIntent {
  std::vector<int> target;           // intended next location
  std::vector<AgentState> next;      // state after the first action
  std::vector<Action> first_action;  // Forward / move only when the location changes
  std::vector<char> pushed;          // reached through another agent's recursion

  int realized(int agent) const { return next[agent].location; }
};

// One PIBT step over next locations followed by first-action extraction.
// Phase one is classical PIBT with priority inheritance and backtracking on
// cells. Phase two takes each agent's first action toward its target; an
// agent that must rotate stays on its cell, and any agent whose Forward would
// enter a cell that is not vacated waits instead (transitively). The realized
// joint step is therefore free of vertex and swap conflicts.
class PibtStepper {
 public:
  PibtStepper(const GridMap& map, ActionModel model)
      : map_(&map), model_(model), occupied_now_(map.size(), -1), occupied_next_(map.size(), -1) {}

  StepIntent step(const PlanningContext& ctx, const std::vector<AgentState>& states, const PriorityState& priorities,
                  const std::vector<int>& hints = {}) {
    const int n = static_cast<int>(states.size());
    ctx_ = &ctx;
    states_ = &states;
    hints_ = &hints;
    priorities_ = &priorities;
    intent_ = StepIntent{};
    intent_.target.assign(n, -1);
    intent_.pushed.assign(n, 0);
    for (int i = 0; i < n; ++i) occupied_now_[states[i].location] = i;

    for (int a : priorities.order()) {
      if (intent_.target[a] != -1) continue;
      [[maybe_unused]] bool ok = plan_agent(a, -1);
      assert(intent_.target[a] != -1);
    }

    extract_first_actions();

    for (int i = 0; i < n; ++i) {
      occupied_now_[states[i].location] = -1;
      occupied_next_[intent_.target[i]] = -1;
    }
    return std::move(intent_);
  }

 private:
  struct Candidate {
    double key;
    std::size_t state_index;
    int location;
  };

  struct Candidates {
    std::array<Candidate, 5> items;
    int count = 0;
    Candidate* begin() { return items.data(); }
    Candidate* end() { return items.data() + count; }
  };

  void candidates_for(int a, Candidates& out) const {
    const AgentState& s = (*states_)[a];
    const DistanceTable& table = ctx_->table(a);
    out.count = 0;
    out.items[out.count++] = {table.at(s), table.index(s.location, s.orientation), s.location};
    for (Orientation d : kOrientations) {
      int u = map_->neighbor(s.location, d);
      if (u < 0) continue;
      Orientation arrive = model_ == ActionModel::Rotation ? d : Orientation::East;
      out.items[out.count++] = {table.at(u, arrive), table.index(u, arrive), u};
    }
    std::sort(out.begin(), out.end(), [](const Candidate& x, const Candidate& y) {
      return x.key != y.key ? x.key < y.key : x.state_index < y.state_index;
    });
    int promoted = -1;
    if (priorities_->disabled[a]) {
      promoted = s.location;  // parked agents never initiate motion
    } else if (!hints_->empty() && (*hints_)[a] >= 0) {
      promoted = (*hints_)[a];
    }
    if (promoted >= 0) {
      auto it = std::find_if(out.begin(), out.end(), [&](const Candidate& c) { return c.location == promoted; });
      if (it != out.end()) std::rotate(out.begin(), it, it + 1);
    }
  }

  bool plan_agent(int a, int parent) {
    Candidates cands;
    candidates_for(a, cands);
    for (const Candidate& c : cands) {
      const int u = c.location;
      if (occupied_next_[u] != -1) continue;
      if (parent != -1 && u == (*states_)[parent].location) continue;
      occupied_next_[u] = a;
      intent_.target[a] = u;
      const int b = occupied_now_[u];
      if (b != -1 && b != a && intent_.target[b] == -1) {
        intent_.pushed[b] = 1;
        if (!plan_agent(b, a)) continue;
      }
      return true;
    }
    const int v = (*states_)[a].location;
    assert(occupied_next_[v] == -1 || parent != -1);
    occupied_next_[v] = a;
    intent_.target[a] = v;
    return false;
  }

  void extract_first_actions() {
    const auto& states = *states_;
    const int n = static_cast<int>(states.size());
    intent_.next.resize(n);
    intent_.first_action.resize(n);
    std::vector<int> stayers;
    for (int a = 0; a < n; ++a) {
      const AgentState& s = states[a];
      const int u = intent_.target[a];
      if (u == s.location) {
        intent_.first_action[a] = Action::Wait;
        intent_.next[a] = s;
        stayers.push_back(a);
        continue;
      }
      const Orientation d = *direction_between(*map_, s.location, u);
      if (model_ == ActionModel::FourWay) {
        intent_.first_action[a] = move_action(d);
        intent_.next[a] = {u, s.orientation};
      } else if (s.orientation == d) {
        intent_.first_action[a] = Action::Forward;
        intent_.next[a] = {u, d};
      } else {
        const Action turn = turn_toward(s.orientation, d).front();
        intent_.first_action[a] = turn;
        intent_.next[a] = apply_action(*map_, s, turn);
        stayers.push_back(a);
      }
    }
    // Whoever heads into a cell that stays occupied must wait, transitively.
    while (!stayers.empty()) {
      const int a = stayers.back();
      stayers.pop_back();
      const int m = occupied_next_[states[a].location];
      if (m == -1 || m == a || intent_.next[m].location == states[m].location) continue;
      intent_.first_action[m] = Action::Wait;
      intent_.next[m] = states[m];
      stayers.push_back(m);
    }
  }

  const GridMap* map_;
  ActionModel model_;
  std::vector<int> occupied_now_;
  std::vector<int> occupied_next_;

  const PlanningContext* ctx_ = nullptr;
  const std::vector<AgentState>* states_ = nullptr;
  const std::vector<int>* hints_ = nullptr;
  const PriorityState* priorities_ = nullptr;
  StepIntent intent_;
};

inline StepIntent pibt_step(const PlanningContext& ctx, const std::vector<AgentState>& states,
                            const PriorityState& priorities, const std::vector<int>& hints = {}) {
  PibtStepper stepper(*ctx.map, ctx.model);
  return stepper.step(ctx, states, priorities, hints);
}

// Previously refined plan steps h..w, re-based so index 0 is the state the
// next window starts from, together with the goals they were planned for.
struct ReusedTail {
  std::vector<Path> paths;
  std::vector<int> goals;

  bool empty() const { return paths.empty(); }
};

// Hinted next location for step k (1-based) of a rollout, or -1. The hint is
// dropped once the agent leaves the tail. A rotation in the tail hints the
// location the tail turns toward. A wait gives no hint: an equal-cost plan
// never replaces it, so replaying it would keep stale waits alive.
inline int hint_location(const Path& tail, int k, const AgentState& current) {
  if (static_cast<int>(tail.size()) <= k || tail[k - 1] != current) return -1;
  const AgentState& next = tail[k];
  if (next.location != current.location) return next.location;
  if (next == current) return -1;
  for (std::size_t j = k + 1; j < tail.size(); ++j) {
    if (tail[j].location != current.location) return tail[j].location;
    if (tail[j] == tail[j - 1]) return -1;
  }
  return -1;
}

// Runs pibt_step `window` times. Agents that arrive at their goal inside the
// window keep targeting it and hold position.
inline WindowedPlan pibt_rollout(const PlanningContext& ctx, const std::vector<AgentState>& states,
                                 PriorityState priorities, int window, const ReusedTail& tail = {}) {
  const int n = static_cast<int>(states.size());
  std::vector<Path> paths(n);
  for (int i = 0; i < n; ++i) {
    paths[i].reserve(window + 1);
    paths[i].push_back(states[i]);
  }
  std::vector<char> hint_ok(n, 0);
  if (!tail.empty())
    for (int i = 0; i < n; ++i) hint_ok[i] = tail.goals[i] == ctx.goals[i] && !tail.paths[i].empty();

  PibtStepper stepper(*ctx.map, ctx.model);
  std::vector<AgentState> current = states;
  std::vector<int> hints;
  std::vector<int> reached;
  for (int k = 1; k <= window; ++k) {
    hints.clear();
    if (!tail.empty()) {
      hints.assign(n, -1);
      for (int i = 0; i < n; ++i)
        if (hint_ok[i]) hints[i] = hint_location(tail.paths[i], k, current[i]);
    }
    StepIntent intent = stepper.step(ctx, current, priorities, hints);
    current = std::move(intent.next);
    reached.clear();
    for (int i = 0; i < n; ++i) {
      paths[i].push_back(current[i]);
      if (current[i].location == ctx.goals[i]) reached.push_back(i);
    }
    priorities = update_priorities(std::move(priorities), reached);
  }
  return make_plan(std::move(paths), ctx);
}

}  // namespace lmapf
