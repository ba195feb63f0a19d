#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lmapf/domain.hpp"
#include "lmapf/guidance.hpp"
#include "lmapf/heuristic.hpp"

namespace lmapf {

using Path = std::vector<AgentState>;

// Everything a windowed solver reads: the world, the per-agent goals used for
// planning (disabled agents are parked on their own cell) and their tables.
struct PlanningContext {
  const GridMap* map = nullptr;
  const GuidanceGraph* guidance = nullptr;
  ActionModel model = ActionModel::Rotation;
  int window = 1;
  std::vector<int> goals;
  std::vector<char> disabled;
  std::vector<HeuristicCache::TablePtr> tables;

  int agent_count() const { return static_cast<int>(goals.size()); }
  const DistanceTable& table(int agent) const { return *tables[agent]; }
  bool is_disabled(int agent) const { return !disabled.empty() && disabled[agent]; }
};

inline PlanningContext make_context(HeuristicCache& cache, std::vector<int> goals, std::vector<char> disabled,
                                    int window) {
  PlanningContext ctx;
  ctx.map = &cache.map();
  ctx.guidance = &cache.guidance();
  ctx.model = cache.model();
  ctx.window = window;
  ctx.goals = std::move(goals);
  ctx.disabled = std::move(disabled);
  if (ctx.disabled.empty()) ctx.disabled.assign(ctx.goals.size(), 0);
  ctx.tables.reserve(ctx.goals.size());
  for (int g : ctx.goals) ctx.tables.push_back(cache.get(g));
  return ctx;
}

// Approximated cost of one agent's windowed path: the weighted cost up to the
// first arrival at its goal, or the weighted cost of the whole window plus
// the remaining table distance when the goal is not reached in the window.
inline double agent_cost(const PlanningContext& ctx, int agent, const Path& path) {
  const int goal = ctx.goals[agent];
  if (path.front().location == goal) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 1; t < path.size(); ++t) {
    acc += step_cost(*ctx.map, *ctx.guidance, path[t - 1], path[t]);
    if (path[t].location == goal) return acc;
  }
  return acc + distance(ctx.table(agent), path.back());
}

struct WindowedPlan {
  int window = 0;
  std::vector<Path> paths;    // per agent, window + 1 states; index 0 is the current state
  std::vector<double> costs;  // per-agent approximated costs
  double objective = 0.0;     // sum of costs, accumulated in agent order

  int agent_count() const { return static_cast<int>(paths.size()); }

  std::vector<AgentState> states_at(int t) const {
    std::vector<AgentState> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(p[t]);
    return out;
  }

  void refresh_objective() {
    objective = 0.0;
    for (double c : costs) objective += c;
  }

  friend bool operator==(const WindowedPlan&, const WindowedPlan&) = default;
};

inline double eval_objective(const WindowedPlan& plan, const PlanningContext& ctx) {
  double total = 0.0;
  for (int i = 0; i < plan.agent_count(); ++i) total += agent_cost(ctx, i, plan.paths[i]);
  return total;
}

inline WindowedPlan make_plan(std::vector<Path> paths, const PlanningContext& ctx) {
  WindowedPlan plan;
  plan.window = paths.empty() ? ctx.window : static_cast<int>(paths.front().size()) - 1;
  plan.paths = std::move(paths);
  plan.costs.resize(plan.paths.size());
  for (int i = 0; i < plan.agent_count(); ++i) plan.costs[i] = agent_cost(ctx, i, plan.paths[i]);
  plan.refresh_objective();
  return plan;
}

// Empty when every path has window + 1 states, every consecutive pair is one
// legal action apart and every joint step is conflict-free.
inline std::optional<std::string> find_plan_defect(const WindowedPlan& plan, const GridMap& map, ActionModel model) {
  for (int i = 0; i < plan.agent_count(); ++i) {
    const Path& p = plan.paths[i];
    if (static_cast<int>(p.size()) != plan.window + 1)
      return "agent " + std::to_string(i) + " path has " + std::to_string(p.size()) + " states";
    for (int t = 1; t <= plan.window; ++t)
      if (!action_between(map, p[t - 1], p[t], model))
        return "agent " + std::to_string(i) + " makes an illegal transition at step " + std::to_string(t);
  }
  for (int t = 1; t <= plan.window; ++t) {
    auto conflicts = check_joint_step(plan.states_at(t - 1), plan.states_at(t), t);
    if (!conflicts.empty()) return "step " + std::to_string(t) + ": " + describe(map, conflicts.front());
  }
  return std::nullopt;
}

}  // namespace lmapf
