#pragma once

#include <concepts>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmapf/domain.hpp"
#include "lmapf/errors.hpp"
#include "lmapf/rng.hpp"
#include "lmapf/wppl.hpp"

namespace lmapf {

// Hands out one new goal whenever an agent completes its current one.
// UniformRandom draws from the free cells of the agent's connected component
// other than its current cell; Scripted cycles through fixed per-agent lists.
class TaskAssigner {
 public:
  static TaskAssigner uniform_random(const GridMap& map, std::uint64_t seed) {
    TaskAssigner a;
    a.map_ = &map;
    a.rng_.seed(stream_seed(seed, "assigner"));
    for (int v : map.free_cells()) a.by_component_[map.component(v)].push_back(v);
    return a;
  }

  static TaskAssigner scripted(std::vector<std::vector<int>> goals) {
    TaskAssigner a;
    a.script_ = std::move(goals);
    a.cursor_.assign(a.script_.size(), 0);
    return a;
  }

  bool is_scripted() const { return map_ == nullptr; }

  int next_goal(int agent, int location) {
    if (is_scripted()) {
      const auto& list = script_.at(agent);
      if (list.empty()) throw std::invalid_argument("empty goal script for agent " + std::to_string(agent));
      return list[cursor_[agent]++ % list.size()];
    }
    const auto& pool = by_component_.at(map_->component(location));
    if (pool.size() == 1) return location;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 2);
    std::size_t k = pick(rng_);
    // Skip over the current cell so the draw is uniform over the others.
    auto it = std::lower_bound(pool.begin(), pool.end(), location);
    if (it != pool.end() && *it == location && k >= static_cast<std::size_t>(it - pool.begin())) ++k;
    return pool[k];
  }

 private:
  TaskAssigner() = default;

  const GridMap* map_ = nullptr;
  Rng rng_;
  std::map<int, std::vector<int>> by_component_;
  std::vector<std::vector<int>> script_;
  std::vector<std::size_t> cursor_;
};

struct GoalRecord {
  int agent = 0;
  int step = 0;
  int goal = 0;

  friend bool operator==(const GoalRecord&, const GoalRecord&) = default;
};

struct RunMetrics {
  int agents = 0;
  int steps = 0;
  int goals_reached = 0;
  double throughput = 0.0;
  std::vector<int> wait_usage;  // per vertex: steps an agent spent there without changing location
  std::vector<GoalRecord> goal_log;
  int overrun_steps = 0;
  int disabled_agents = 0;  // disabled at the end of the run

  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

using Trajectory = std::vector<std::vector<AgentState>>;  // index 0 is the start

struct SimulationResult {
  RunMetrics metrics;
  Trajectory trajectory;
  std::vector<char> disabled;
};

template <class P>
concept StepPlanner = requires(P p, const WorldView& view, const std::vector<int>& reached) {
  { p.next_step(view) } -> std::same_as<StepDecision>;
  p.after_step(reached);
};

struct SimulateOptions {
  bool record_trajectory = true;
};

// The lifelong loop. Every joint step the planner returns is checked for
// legality and conflicts before it is applied; a bad step is a hard error.
template <StepPlanner P>
SimulationResult simulate(const Instance& instance, P& planner, TaskAssigner& assigner, int total_steps,
                          const DisablePolicy& policy = {}, const SimulateOptions& options = {}) {
  if (total_steps < 0) throw std::invalid_argument("total steps must be >= 0");
  instance.validate();
  const GridMap& map = instance.map;
  const int n = instance.agent_count();

  SimulationResult out;
  RunMetrics& m = out.metrics;
  m.agents = n;
  m.wait_usage.assign(map.size(), 0);

  std::vector<AgentState> states = instance.starts;
  std::vector<int> goals(n);
  for (int i = 0; i < n; ++i) goals[i] = assigner.next_goal(i, states[i].location);
  DisableResult dr = apply_disable_policy(map, states, goals, policy);
  std::vector<char> disabled = dr.disabled;

  // Disabled agents plan toward wherever they currently are.
  std::vector<int> planning_goals(n);
  auto refresh_planning_goals = [&] {
    for (int i = 0; i < n; ++i) planning_goals[i] = disabled[i] ? states[i].location : goals[i];
  };

  if (options.record_trajectory) {
    out.trajectory.reserve(total_steps + 1);
    out.trajectory.push_back(states);
  }
  std::vector<int> reached;
  for (int step = 1; step <= total_steps; ++step) {
    refresh_planning_goals();
    WorldView view{step - 1, &states, &planning_goals, &disabled};
    StepDecision d = planner.next_step(view);
    if (static_cast<int>(d.next.size()) != n)
      throw InvalidJointAction(step, "planner returned " + std::to_string(d.next.size()) + " states");
    for (int i = 0; i < n; ++i) {
      if (!map.is_free(d.next[i].location) || !action_between(map, states[i], d.next[i], instance.model))
        throw InvalidJointAction(step, "agent " + std::to_string(i) + " has no legal action to its next state");
    }
    auto conflicts = check_joint_step(states, d.next, step);
    if (!conflicts.empty()) throw InvalidJointAction(step, describe(map, conflicts.front()));
    if (d.overrun) ++m.overrun_steps;

    for (int i = 0; i < n; ++i)
      if (d.next[i].location == states[i].location) ++m.wait_usage[states[i].location];
    states = std::move(d.next);

    reached.clear();
    for (int i = 0; i < n; ++i) {
      if (disabled[i] || states[i].location != goals[i]) continue;
      reached.push_back(i);
      m.goal_log.push_back({i, step, goals[i]});
      goals[i] = assigner.next_goal(i, states[i].location);
      if (disables_on_assignment(map, goals[i], policy)) disabled[i] = 1;
    }
    planner.after_step(reached);
    if (options.record_trajectory) out.trajectory.push_back(states);
    m.steps = step;
  }
  m.goals_reached = static_cast<int>(m.goal_log.size());
  m.throughput = m.steps > 0 ? static_cast<double>(m.goals_reached) / m.steps : 0.0;
  for (char c : disabled) m.disabled_agents += c;
  out.disabled = std::move(disabled);
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline nlohmann::json heatmap_to_json(const std::vector<int>& wait_usage, const GridMap& map) {
  nlohmann::json values = nlohmann::json::array();
  for (int r = 0; r < map.height(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < map.width(); ++c) {
      const int v = map.vertex(r, c);
      if (map.is_free(v))
        row.push_back(wait_usage.empty() ? 0 : wait_usage[v]);
      else
        row.push_back(nullptr);
    }
    values.push_back(std::move(row));
  }
  return {{"format", "lmapf-heatmap"}, {"version", 1}, {"height", map.height()}, {"width", map.width()},
          {"values", std::move(values)}};
}

inline void export_heatmap(const RunMetrics& metrics, const GridMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << heatmap_to_json(metrics.wait_usage, map).dump() << '\n';
}

inline nlohmann::json metrics_to_json(const RunMetrics& m) {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& g : m.goal_log) log.push_back({g.agent, g.step, g.goal});
  return {{"agents", m.agents},
          {"steps", m.steps},
          {"goals_reached", m.goals_reached},
          {"throughput", m.throughput},
          {"overrun_steps", m.overrun_steps},
          {"disabled_agents", m.disabled_agents},
          {"wait_usage", m.wait_usage},
          {"goal_log", std::move(log)}};
}

inline RunMetrics metrics_from_json(const nlohmann::json& j) {
  RunMetrics m;
  m.agents = j.at("agents").get<int>();
  m.steps = j.at("steps").get<int>();
  m.goals_reached = j.at("goals_reached").get<int>();
  m.throughput = j.at("throughput").get<double>();
  m.overrun_steps = j.at("overrun_steps").get<int>();
  m.disabled_agents = j.at("disabled_agents").get<int>();
  m.wait_usage = j.at("wait_usage").get<std::vector<int>>();
  for (const auto& g : j.at("goal_log")) m.goal_log.push_back({g.at(0).get<int>(), g.at(1).get<int>(), g.at(2).get<int>()});
  return m;
}

// Header line, then one line per step (start included) of `row col O`
// triples, one per agent.
inline void write_trajectory(std::ostream& out, const GridMap& map, ActionModel model, const Trajectory& traj) {
  const std::size_t n = traj.empty() ? 0 : traj.front().size();
  out << "lmapf-trajectory v1 height " << map.height() << " width " << map.width() << " agents " << n << " steps "
      << (traj.empty() ? 0 : traj.size() - 1) << " model " << to_string(model) << '\n';
  for (const auto& states : traj) {
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (i) out << ' ';
      out << map.row(states[i].location) << ' ' << map.col(states[i].location) << ' ' << to_char(states[i].orientation);
    }
    out << '\n';
  }
}

inline void save_trajectory(const std::string& path, const GridMap& map, ActionModel model, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_trajectory(out, map, model, traj);
}

struct TrajectoryFile {
  int height = 0;
  int width = 0;
  ActionModel model = ActionModel::Rotation;
  Trajectory states;
};

inline TrajectoryFile parse_trajectory(std::istream& in, const GridMap& map, const std::string& source = "<trajectory>") {
  TrajectoryFile f;
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line)) throw ParseError(source, line_no, "missing header");
  std::istringstream header(line);
  std::string magic, version, k_h, k_w, k_a, k_s, k_m, model;
  std::size_t agents = 0, steps = 0;
  header >> magic >> version >> k_h >> f.height >> k_w >> f.width >> k_a >> agents >> k_s >> steps >> k_m >> model;
  if (!header || magic != "lmapf-trajectory" || version != "v1" || k_h != "height" || k_w != "width" ||
      k_a != "agents" || k_s != "steps" || k_m != "model")
    throw ParseError(source, line_no, "malformed header");
  if (model == "rotation")
    f.model = ActionModel::Rotation;
  else if (model == "fourway")
    f.model = ActionModel::FourWay;
  else
    throw ParseError(source, line_no, "unknown action model '" + model + "'");
  if (f.height != map.height() || f.width != map.width())
    throw ParseError(source, line_no, "trajectory dimensions do not match the map");

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<AgentState> states;
    int r = 0, c = 0;
    std::string o;
    while (ls >> r >> c >> o) {
      auto orient = o.size() == 1 ? orientation_from_char(o[0]) : std::nullopt;
      if (!orient) throw ParseError(source, line_no, "bad orientation '" + o + "'");
      if (!map.is_free(r, c))
        throw ParseError(source, line_no, "cell (" + std::to_string(r) + "," + std::to_string(c) + ") is not free");
      states.push_back({map.vertex(r, c), *orient});
    }
    if (!ls.eof()) throw ParseError(source, line_no, "malformed agent triple");
    if (states.size() != agents)
      throw ParseError(source, line_no,
                       "expected " + std::to_string(agents) + " agents, found " + std::to_string(states.size()));
    f.states.push_back(std::move(states));
  }
  if (f.states.size() != steps + 1)
    throw ParseError(source, line_no,
                     "expected " + std::to_string(steps + 1) + " step lines, found " + std::to_string(f.states.size()));
  return f;
}

inline TrajectoryFile load_trajectory(const std::string& path, const GridMap& map) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_trajectory(in, map, path);
}

// Empty when every step is a legal, conflict-free joint transition.
inline std::optional<std::string> validate_trajectory(const GridMap& map, ActionModel model, const Trajectory& traj) {
  if (traj.empty()) return std::nullopt;
  {
    Instance start{map, traj.front(), model};
    try {
      start.validate();
    } catch (const std::exception& e) {
      return std::string("start: ") + e.what();
    }
  }
  for (std::size_t t = 1; t < traj.size(); ++t) {
    for (std::size_t i = 0; i < traj[t].size(); ++i)
      if (!action_between(map, traj[t - 1][i], traj[t][i], model))
        return "step " + std::to_string(t) + ": agent " + std::to_string(i) + " makes an illegal transition";
    auto conflicts = check_joint_step(traj[t - 1], traj[t], static_cast<int>(t));
    if (!conflicts.empty()) return "step " + std::to_string(t) + ": " + describe(map, conflicts.front());
  }
  return std::nullopt;
}

}  // namespace lmapf
