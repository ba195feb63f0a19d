#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmapf/domain.hpp"
#include "lmapf/errors.hpp"
#include "lmapf/guidance.hpp"
#include "lmapf/heuristic.hpp"
#include "lmapf/io.hpp"
#include "lmapf/rng.hpp"
#include "lmapf/simulator.hpp"
#include "lmapf/wppl.hpp"

namespace lmapf {

inline constexpr const char* kOutputDirEnv = "LMAPF_OUTPUT_DIR";

// Planner and simulation settings of one run; everything stochastic derives
// from `seed`.
struct RunSettings {
  WpplConfig planner;  // algorithm, window, budgets, workers, reuse, disabling
  int total_steps = 500;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> total_iterations;  // split evenly over the replans
  bool keep_commit_log = false;
  bool record_trajectory = true;
};

struct RunConfig {
  std::string config_path;  // empty when built in code
  std::string map_path;
  std::string agents_path;
  std::string weights_path;  // empty: use `guidance`
  std::string guidance = "uniform";
  std::optional<ActionModel> action_model;  // overrides the agent file's model
  std::string output_dir;
  RunSettings settings;
};

struct RunResult {
  SimulationResult sim;
  PlannerStats stats;
  double wall_ms = 0.0;

  double first_window_objective() const { return stats.cycles.empty() ? 0.0 : stats.cycles.front().final_objective; }
  double mean_planning_ms_per_step() const {
    double total = 0.0;
    for (const auto& c : stats.cycles) total += c.planning_ms;
    return sim.metrics.steps > 0 ? total / sim.metrics.steps : 0.0;
  }
};

// ---------------------------------------------------------------------------
// Config files

namespace detail {

inline std::string join_path(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

inline void reject_unknown(const nlohmann::json& obj, const std::string& where,
                           std::initializer_list<const char*> known, const std::string& source) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(source + ": " + join_path(where, it.key()) + ": unknown field");
  }
}

template <class T>
T field(const nlohmann::json& obj, const char* key, const std::string& where, const std::string& source, T fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(source + ": " + join_path(where, key) + ": wrong type");
  }
}

inline ActionModel parse_action_model(const std::string& s, const std::string& where) {
  if (s == "rotation") return ActionModel::Rotation;
  if (s == "fourway") return ActionModel::FourWay;
  throw ConfigError(where + ": expected 'rotation' or 'fourway', got '" + s + "'");
}

inline Algorithm parse_algorithm(const std::string& s, const std::string& where) {
  if (s == "wppl") return Algorithm::Wppl;
  if (s == "pibt") return Algorithm::Pibt;
  throw ConfigError(where + ": expected 'wppl' or 'pibt', got '" + s + "'");
}

inline std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace detail

inline DisablePolicy parse_disable_policy(const std::string& s, const std::string& where = "disable") {
  if (s == "none") return DisablePolicy::none();
  if (s == "deadend_goals") return DisablePolicy::deadend_goals();
  const std::string prefix = "random_k:";
  if (s.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      int k = std::stoi(s.substr(prefix.size()), &used);
      if (used == s.size() - prefix.size()) return DisablePolicy::random_k(k, 0);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError(where + ": expected 'none', 'deadend_goals' or 'random_k:<k>', got '" + s + "'");
}

inline std::string to_string(const DisablePolicy& p) {
  switch (p.kind) {
    case DisablePolicy::Kind::None: return "none";
    case DisablePolicy::Kind::DeadendGoals: return "deadend_goals";
    case DisablePolicy::Kind::RandomK: return "random_k:" + std::to_string(p.k);
  }
  return "none";
}

// Paths inside the document are relative to `base_dir`.
inline RunConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir = "",
                                  const std::string& source = "<config>") {
  using detail::field;
  if (!doc.is_object()) throw ConfigError(source + ": expected a JSON object");
  detail::reject_unknown(doc, "",
                         {"map", "agents", "weights", "guidance", "algorithm", "action_model", "total_steps", "seed",
                          "output_dir", "total_iterations", "wppl"},
                         source);
  RunConfig c;
  c.map_path = detail::resolve(base_dir, field<std::string>(doc, "map", "", source, ""));
  c.agents_path = detail::resolve(base_dir, field<std::string>(doc, "agents", "", source, ""));
  if (c.map_path.empty()) throw ConfigError(source + ": map: missing field");
  if (c.agents_path.empty()) throw ConfigError(source + ": agents: missing field");
  c.weights_path = detail::resolve(base_dir, field<std::string>(doc, "weights", "", source, ""));
  c.guidance = field<std::string>(doc, "guidance", "", source, "uniform");
  if (c.guidance != "uniform" && c.guidance != "crisscross")
    throw ConfigError(source + ": guidance: expected 'uniform' or 'crisscross'");
  if (doc.contains("action_model") && !doc["action_model"].is_null())
    c.action_model = detail::parse_action_model(field<std::string>(doc, "action_model", "", source, ""),
                                                source + ": action_model");
  c.output_dir = detail::resolve(base_dir, field<std::string>(doc, "output_dir", "", source, ""));

  RunSettings& s = c.settings;
  s.planner.algorithm =
      detail::parse_algorithm(field<std::string>(doc, "algorithm", "", source, "wppl"), source + ": algorithm");
  s.total_steps = field<int>(doc, "total_steps", "", source, 500);
  if (s.total_steps < 1) throw ConfigError(source + ": total_steps: must be >= 1");
  s.seed = field<std::uint64_t>(doc, "seed", "", source, 0);
  if (doc.contains("total_iterations") && !doc["total_iterations"].is_null()) {
    s.total_iterations = field<std::int64_t>(doc, "total_iterations", "", source, 0);
    if (*s.total_iterations < 0) throw ConfigError(source + ": total_iterations: must be >= 0");
  }

  if (doc.contains("wppl")) {
    const auto& w = doc["wppl"];
    if (!w.is_object()) throw ConfigError(source + ": wppl: expected an object");
    detail::reject_unknown(w, "wppl",
                           {"window", "replan_period", "budget", "workers", "reuse", "neighborhood_size", "disable"},
                           source);
    WpplConfig& p = s.planner;
    p.window = field<int>(w, "window", "wppl", source, p.window);
    p.replan_period = field<int>(w, "replan_period", "wppl", source, p.replan_period);
    p.workers = field<int>(w, "workers", "wppl", source, p.workers);
    p.reuse = field<bool>(w, "reuse", "wppl", source, p.reuse);
    p.neighborhood_size = field<int>(w, "neighborhood_size", "wppl", source, p.neighborhood_size);
    p.disable = parse_disable_policy(field<std::string>(w, "disable", "wppl", source, "none"), source + ": wppl.disable");
    if (w.contains("budget")) {
      const auto& b = w["budget"];
      if (!b.is_object()) throw ConfigError(source + ": wppl.budget: expected an object");
      detail::reject_unknown(b, "wppl.budget", {"mode", "iterations", "step_time_ms"}, source);
      const std::string mode = field<std::string>(b, "mode", "wppl.budget", source, "iterations");
      if (mode == "iterations")
        p.budget_mode = BudgetMode::Iterations;
      else if (mode == "wall_time")
        p.budget_mode = BudgetMode::WallTime;
      else
        throw ConfigError(source + ": wppl.budget.mode: expected 'iterations' or 'wall_time'");
      p.iterations_per_replan = field<std::int64_t>(b, "iterations", "wppl.budget", source, p.iterations_per_replan);
      p.step_time_ms = field<double>(b, "step_time_ms", "wppl.budget", source, p.step_time_ms);
    }
  }
  return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  const WpplConfig& p = c.settings.planner;
  nlohmann::json budget = {{"mode", p.budget_mode == BudgetMode::Iterations ? "iterations" : "wall_time"},
                           {"iterations", p.iterations_per_replan},
                           {"step_time_ms", p.step_time_ms}};
  nlohmann::json doc = {{"map", c.map_path},
                        {"agents", c.agents_path},
                        {"guidance", c.guidance},
                        {"algorithm", to_string(p.algorithm)},
                        {"total_steps", c.settings.total_steps},
                        {"seed", c.settings.seed},
                        {"wppl",
                         {{"window", p.window},
                          {"replan_period", p.replan_period},
                          {"budget", budget},
                          {"workers", p.workers},
                          {"reuse", p.reuse},
                          {"neighborhood_size", p.neighborhood_size},
                          {"disable", to_string(p.disable)}}}};
  if (!c.weights_path.empty()) doc["weights"] = c.weights_path;
  if (c.action_model) doc["action_model"] = to_string(*c.action_model);
  if (!c.output_dir.empty()) doc["output_dir"] = c.output_dir;
  if (c.settings.total_iterations) doc["total_iterations"] = *c.settings.total_iterations;
  return doc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  RunConfig c = config_from_json(doc, std::filesystem::path(path).parent_path().string(), path);
  c.config_path = path;
  return c;
}

inline std::string effective_output_dir(const RunConfig& c) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return c.output_dir;
}

struct LoadedInstance {
  Instance instance;
  GuidanceGraph guidance;
};

inline Instance convert_model(Instance inst, ActionModel model) {
  if (inst.model == model) return inst;
  inst.model = model;
  if (model == ActionModel::FourWay)
    for (auto& s : inst.starts) s.orientation = Orientation::East;
  return inst;
}

inline LoadedInstance load_instance(const RunConfig& c) {
  GridMap map = load_map(c.map_path);
  AgentFile agents = load_agents(c.agents_path, map);
  Instance inst{map, agents.starts, agents.model};
  if (c.action_model) inst = convert_model(std::move(inst), *c.action_model);
  inst.validate();
  GuidanceGraph g = !c.weights_path.empty()       ? load_weights(map, c.weights_path)
                    : c.guidance == "crisscross" ? crisscross_guidance(map)
                                                 : uniform_guidance(map);
  return {std::move(inst), std::move(g)};
}

// ---------------------------------------------------------------------------
// Running

inline WpplConfig planner_config(const RunSettings& s, int agent_count) {
  WpplConfig cfg = s.planner;
  cfg.seed = s.seed;
  cfg.disable.seed = s.seed;
  if (s.total_iterations && cfg.algorithm == Algorithm::Wppl) {
    const std::int64_t replans = (s.total_steps + cfg.replan_period - 1) / cfg.replan_period;
    cfg.iterations_per_replan = *s.total_iterations / replans;
    cfg.extra_iteration_cycles = static_cast<int>(*s.total_iterations % replans);
  }
  cfg = cfg.effective();
  cfg.validate(agent_count);
  return cfg;
}

inline RunResult run_instance(const Instance& instance, const GuidanceGraph& guidance, const RunSettings& s,
                              std::shared_ptr<HeuristicCache> cache = nullptr) {
  const WpplConfig cfg = planner_config(s, instance.agent_count());
  if (!cache) cache = std::make_shared<HeuristicCache>(instance.map, guidance, instance.model);
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  TaskAssigner assigner = TaskAssigner::uniform_random(cache->map(), s.seed);
  {
    WpplPlanner planner(cache, cfg, instance.agent_count(), s.keep_commit_log);
    r.sim = simulate(instance, planner, assigner, s.total_steps, cfg.disable, {s.record_trajectory});
    r.stats = planner.stats();
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline nlohmann::json commit_log_to_json(const PlannerStats& stats) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [cycle, e] : stats.commits)
    out.push_back({{"cycle", cycle},
                   {"iteration", e.iteration},
                   {"worker", e.worker},
                   {"members", e.members},
                   {"before", e.before},
                   {"after", std::isfinite(e.after) ? nlohmann::json(e.after) : nlohmann::json(nullptr)},
                   {"accepted", e.accepted}});
  return out;
}

inline nlohmann::json run_summary_json(const RunResult& r) {
  nlohmann::json cycles = nlohmann::json::array();
  for (const auto& c : r.stats.cycles)
    cycles.push_back({{"cycle", c.cycle},
                      {"start_step", c.start_step},
                      {"initial_objective", c.initial_objective},
                      {"final_objective", c.final_objective},
                      {"proposals", c.proposals},
                      {"accepted", c.accepted},
                      {"overrun_steps", c.overrun_steps}});
  nlohmann::json j = metrics_to_json(r.sim.metrics);
  j["cycles"] = std::move(cycles);
  j["first_window_objective"] = r.first_window_objective();
  return j;
}

inline nlohmann::json timing_json(const RunResult& r) {
  nlohmann::json per_cycle = nlohmann::json::array();
  for (const auto& c : r.stats.cycles) per_cycle.push_back(c.planning_ms);
  return {{"wall_ms", r.wall_ms},
          {"mean_planning_ms_per_step", r.mean_planning_ms_per_step()},
          {"planning_ms_per_cycle", std::move(per_cycle)}};
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

// Output directory layout: metrics.json, heatmap.json, trajectory.txt,
// commit_log.json and timing.json (the only file with wall-clock values).
inline void write_run_outputs(const std::string& dir, const Instance& inst, const RunResult& r) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  write_json_file(d / "metrics.json", run_summary_json(r));
  export_heatmap(r.sim.metrics, inst.map, (d / "heatmap.json").string());
  if (!r.sim.trajectory.empty()) save_trajectory((d / "trajectory.txt").string(), inst.map, inst.model, r.sim.trajectory);
  write_json_file(d / "commit_log.json", commit_log_to_json(r.stats));
  write_json_file(d / "timing.json", timing_json(r));
}

inline RunResult run(const RunConfig& c) {
  LoadedInstance li = load_instance(c);
  RunSettings s = c.settings;
  s.keep_commit_log = true;
  RunResult r = run_instance(li.instance, li.guidance, s);
  const std::string dir = effective_output_dir(c);
  if (!dir.empty()) write_run_outputs(dir, li.instance, r);
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepParameter : std::uint8_t { Window, Agents, TimeBudget };

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  if (s == "window") return SweepParameter::Window;
  if (s == "agents") return SweepParameter::Agents;
  if (s == "time_budget") return SweepParameter::TimeBudget;
  throw ConfigError("sweep parameter must be window, agents or time_budget, got '" + s + "'");
}

inline const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::Window: return "window";
    case SweepParameter::Agents: return "agents";
    case SweepParameter::TimeBudget: return "time_budget";
  }
  return "?";
}

// window: w = value (h is clamped to w). agents: value agents stay active and
// the rest are disabled at random. time_budget: total LNS iterations in
// iteration mode, per-step milliseconds in wall-time mode.
inline RunSettings apply_sweep_value(RunSettings s, SweepParameter p, double value, int agent_count) {
  switch (p) {
    case SweepParameter::Window:
      if (value < 1) throw ConfigError("window values must be >= 1");
      s.planner.window = static_cast<int>(value);
      s.planner.replan_period = std::min(s.planner.replan_period, s.planner.window);
      break;
    case SweepParameter::Agents:
      if (value < 1 || value > agent_count) throw ConfigError("agents values must be in [1, agent count]");
      s.planner.disable = value == agent_count ? DisablePolicy::none()
                                               : DisablePolicy::random_k(agent_count - static_cast<int>(value), 0);
      break;
    case SweepParameter::TimeBudget:
      if (value < 0) throw ConfigError("time budget values must be >= 0");
      if (s.planner.budget_mode == BudgetMode::Iterations)
        s.total_iterations = static_cast<std::int64_t>(value);
      else
        s.planner.step_time_ms = value;
      break;
  }
  return s;
}

struct SweepRow {
  double value = 0.0;
  RunMetrics metrics;
  double mean_planning_ms_per_step = 0.0;
  double first_window_objective = 0.0;
};

inline std::vector<SweepRow> sweep(const Instance& inst, const GuidanceGraph& guidance, const RunSettings& base,
                                   SweepParameter p, const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  auto cache = std::make_shared<HeuristicCache>(inst.map, guidance, inst.model);
  std::vector<SweepRow> rows;
  for (double v : values) {
    RunSettings s = apply_sweep_value(base, p, v, inst.agent_count());
    s.record_trajectory = false;
    RunResult r = run_instance(inst, guidance, s, cache);
    rows.push_back({v, r.sim.metrics, r.mean_planning_ms_per_step(), r.first_window_objective()});
  }
  return rows;
}

inline std::string format_value(double v) {
  std::ostringstream ss;
  ss << std::setprecision(12) << v;
  return ss.str();
}

// Tab-separated, one header line.
inline void write_sweep_table(std::ostream& out, SweepParameter p, const std::vector<SweepRow>& rows) {
  out << to_string(p) << "\tthroughput\tgoals_reached\tsteps\tmean_planning_ms_per_step\tfirst_window_objective\n";
  for (const auto& r : rows)
    out << format_value(r.value) << '\t' << format_value(r.metrics.throughput) << '\t' << r.metrics.goals_reached
        << '\t' << r.metrics.steps << '\t' << format_value(r.mean_planning_ms_per_step) << '\t'
        << format_value(r.first_window_objective) << '\n';
}

}  // namespace lmapf
