#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lmapf/experiment.hpp"
#include "lmapf/io.hpp"
#include "lmapf/maps.hpp"
#include "lmapf/simulator.hpp"
#include "test_util.hpp"

using namespace lmapf;
using namespace lmapf::testing;
using O = Orientation;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("lmapf_sim_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WpplPlanner make_planner(const Instance& inst, WpplConfig cfg, std::shared_ptr<HeuristicCache>& cache) {
  cache = std::make_shared<HeuristicCache>(inst.map, GuidanceGraph(inst.map), inst.model);
  return WpplPlanner(cache, cfg, inst.agent_count());
}

// Steps needed to shuttle between the two ends of a 1 x L corridor.
struct Shuttle {
  int first;  // start at the west end facing east
  int later;  // every subsequent leg
};

// A new goal only reaches the planner at its next replan, which happens every
// `period` steps; the agent holds its cell until then.
int goals_within(const Shuttle& s, int steps, int period) {
  int count = 0;
  for (int t = s.first; t <= steps; t = (t + period - 1) / period * period + s.later) ++count;
  return count;
}

}  // namespace

// ---------------------------------------------------------------------------
// Task assignment

TEST(Assigner, UniformDrawsStayInComponentAndAvoidCurrentCell) {
  GridMap m = grid({"..@..", "..@..", "..@.."});
  TaskAssigner a = TaskAssigner::uniform_random(m, 3);
  std::map<int, int> counts;
  for (int k = 0; k < 6000; ++k) {
    const int g = a.next_goal(0, m.vertex(0, 0));
    EXPECT_NE(g, m.vertex(0, 0));
    EXPECT_EQ(m.component(g), m.component(m.vertex(0, 0)));
    ++counts[g];
  }
  EXPECT_EQ(counts.size(), 5u);
  for (auto [cell, c] : counts) EXPECT_NEAR(c, 1200, 200) << cell;
  GridMap single = grid({".@."});
  TaskAssigner b = TaskAssigner::uniform_random(single, 0);
  EXPECT_EQ(b.next_goal(0, 0), 0);
}

TEST(Assigner, ScriptedCycles) {
  TaskAssigner a = TaskAssigner::scripted({{4, 5}, {}});
  EXPECT_EQ(a.next_goal(0, 0), 4);
  EXPECT_EQ(a.next_goal(0, 0), 5);
  EXPECT_EQ(a.next_goal(0, 0), 4);
  EXPECT_THROW(a.next_goal(1, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Lifelong loop

TEST(Simulate, LoneShuttleMatchesClosedForm) {
  GridMap m = open_grid(1, 6);
  const int west = m.vertex(0, 0), east = m.vertex(0, 5);
  // Rotation: 5 moves out, then 2 turns + 5 moves per leg. FourWay: 5 per leg.
  const Shuttle rotation{5, 7}, fourway{5, 5};
  for (ActionModel model : {ActionModel::Rotation, ActionModel::FourWay}) {
    for (Algorithm alg : {Algorithm::Pibt, Algorithm::Wppl}) {
      for (int steps : {0, 4, 5, 11, 12, 500}) {
        Instance inst{m, {at(m, 0, 0)}, model};
        WpplConfig cfg;
        cfg.algorithm = alg;
        cfg.iterations_per_replan = 5;
        std::shared_ptr<HeuristicCache> cache;
        WpplPlanner planner = make_planner(inst, cfg, cache);
        TaskAssigner a = TaskAssigner::scripted({{east, west}});
        SimulationResult r = simulate(inst, planner, a, steps);
        const int expect = goals_within(model == ActionModel::Rotation ? rotation : fourway, steps,
                                        planner.config().replan_period);
        EXPECT_EQ(r.metrics.goals_reached, expect) << to_string(model) << ' ' << steps;
        EXPECT_EQ(r.metrics.steps, steps);
        EXPECT_DOUBLE_EQ(r.metrics.throughput, steps ? static_cast<double>(expect) / steps : 0.0);
        EXPECT_EQ(r.trajectory.size(), static_cast<std::size_t>(steps) + 1);
      }
    }
  }
}

TEST(Simulate, GoalLogMatchesTrajectory) {
  Instance inst{random_map(16, 16, 0.2, 4), {}, ActionModel::Rotation};
  inst.starts = random_starts(inst.map, 40, inst.model, 4);
  RunSettings s;
  s.total_steps = 120;
  s.planner.iterations_per_replan = 20;
  RunResult r = run_instance(inst, GuidanceGraph(inst.map), s);
  const auto& m = r.sim.metrics;
  EXPECT_EQ(m.goals_reached, static_cast<int>(m.goal_log.size()));
  for (const auto& g : m.goal_log) EXPECT_EQ(r.sim.trajectory[g.step][g.agent].location, g.goal);
  int waits = 0;
  for (std::size_t t = 1; t < r.sim.trajectory.size(); ++t)
    for (int i = 0; i < 40; ++i) waits += r.sim.trajectory[t][i].location == r.sim.trajectory[t - 1][i].location;
  int total = 0;
  for (int w : m.wait_usage) total += w;
  EXPECT_EQ(total, waits);
  EXPECT_FALSE(validate_trajectory(inst.map, inst.model, r.sim.trajectory).has_value());
}

TEST(Simulate, AllAgentsDisabledReachNothing) {
  GridMap m = open_grid(1, 3);
  Instance inst{m, {at(m, 0, 1)}, ActionModel::Rotation};
  std::shared_ptr<HeuristicCache> cache;
  WpplPlanner planner = make_planner(inst, {}, cache);
  TaskAssigner a = TaskAssigner::scripted({{m.vertex(0, 0)}});
  SimulationResult r = simulate(inst, planner, a, 50, DisablePolicy::deadend_goals());
  EXPECT_EQ(r.metrics.goals_reached, 0);
  EXPECT_EQ(r.metrics.throughput, 0.0);
  EXPECT_EQ(r.metrics.disabled_agents, 1);
  for (const auto& states : r.trajectory) EXPECT_EQ(states[0].location, m.vertex(0, 1));
  EXPECT_EQ(r.metrics.wait_usage[m.vertex(0, 1)], 50);
}

TEST(Simulate, DeadendAssignmentDisablesLater) {
  GridMap m = open_grid(1, 4);
  Instance inst{m, {at(m, 0, 1)}, ActionModel::FourWay};
  std::shared_ptr<HeuristicCache> cache;
  WpplPlanner planner = make_planner(inst, {}, cache);
  TaskAssigner a = TaskAssigner::scripted({{m.vertex(0, 2), m.vertex(0, 3)}});
  SimulationResult r = simulate(inst, planner, a, 20, DisablePolicy::deadend_goals());
  EXPECT_EQ(r.metrics.goals_reached, 1);
  EXPECT_EQ(r.metrics.disabled_agents, 1);
  EXPECT_EQ(r.trajectory.back()[0].location, m.vertex(0, 2));
}

namespace {

struct SwapPlanner {
  StepDecision next_step(const WorldView& v) {
    std::vector<AgentState> next = *v.states;
    std::swap(next[0].location, next[1].location);
    return {next, false};
  }
  void after_step(const std::vector<int>&) {}
};

struct TeleportPlanner {
  const GridMap* map;
  StepDecision next_step(const WorldView& v) {
    std::vector<AgentState> next = *v.states;
    next[0].location = map->vertex(0, 3);
    return {next, false};
  }
  void after_step(const std::vector<int>&) {}
};

}  // namespace

TEST(Simulate, BadJointStepsAreHardErrors) {
  GridMap m = open_grid(1, 4);
  Instance inst{m, {at(m, 0, 0), at(m, 0, 1, O::West)}, ActionModel::Rotation};
  TaskAssigner a = TaskAssigner::uniform_random(m, 0);
  SwapPlanner swap;
  try {
    simulate(inst, swap, a, 5);
    FAIL();
  } catch (const InvalidJointAction& e) {
    EXPECT_EQ(e.step(), 1);
  }
  TeleportPlanner tp{&m};
  EXPECT_THROW(simulate(inst, tp, a, 5), InvalidJointAction);
}

TEST(Simulate, RunsAreDeterministic) {
  Instance inst{random_map(20, 20, 0.2, 2), {}, ActionModel::Rotation};
  inst.starts = random_starts(inst.map, 80, inst.model, 2);
  for (Algorithm alg : {Algorithm::Pibt, Algorithm::Wppl}) {
    RunSettings s;
    s.planner.algorithm = alg;
    s.planner.iterations_per_replan = 30;
    s.total_steps = 100;
    s.seed = 9;
    RunResult a = run_instance(inst, crisscross_guidance(inst.map), s);
    RunResult b = run_instance(inst, crisscross_guidance(inst.map), s);
    EXPECT_EQ(a.sim.metrics, b.sim.metrics);
    EXPECT_EQ(a.sim.trajectory, b.sim.trajectory);
    s.seed = 10;
    RunResult c = run_instance(inst, crisscross_guidance(inst.map), s);
    EXPECT_NE(a.sim.trajectory, c.sim.trajectory);
  }
}

TEST(Simulate, WallTimeModeProducesValidRuns) {
  Instance inst{random_map(16, 16, 0.2, 5), {}, ActionModel::Rotation};
  inst.starts = random_starts(inst.map, 50, inst.model, 5);
  RunSettings s;
  s.planner.budget_mode = BudgetMode::WallTime;
  s.planner.step_time_ms = 2;
  s.planner.workers = 2;
  s.total_steps = 60;
  RunResult r = run_instance(inst, GuidanceGraph(inst.map), s);
  EXPECT_EQ(r.sim.metrics.steps, 60);
  EXPECT_FALSE(validate_trajectory(inst.map, inst.model, r.sim.trajectory).has_value());
  int overrun = 0;
  for (std::size_t t = 1; t < r.sim.trajectory.size(); ++t) overrun += r.sim.trajectory[t] == r.sim.trajectory[t - 1];
  EXPECT_GE(overrun, r.sim.metrics.overrun_steps);
}

TEST(Simulate, FixedTotalIterationsAreSplitOverReplans) {
  RunSettings s;
  s.total_steps = 10;
  s.planner.replan_period = 3;
  s.total_iterations = 9;
  WpplConfig c = planner_config(s, 5);
  EXPECT_EQ(c.iterations_per_replan, 2);  // 4 replans: 3 + 2 + 2 + 2
  EXPECT_EQ(c.extra_iteration_cycles, 1);
  Instance inst{random_map(12, 12, 0.2, 1), {}, ActionModel::Rotation};
  inst.starts = random_starts(inst.map, 20, inst.model, 1);
  s.keep_commit_log = true;
  RunResult r = run_instance(inst, GuidanceGraph(inst.map), s);
  EXPECT_EQ(r.stats.commits.size(), 9u);
}

// ---------------------------------------------------------------------------
// Files

TEST(Files, HeatmapMarksObstaclesNull) {
  GridMap m = grid({".@", ".."});
  nlohmann::json j = heatmap_to_json({3, 0, 0, 7}, m);
  EXPECT_EQ(j["format"], "lmapf-heatmap");
  EXPECT_EQ(j["height"], 2);
  EXPECT_EQ(j["values"][0][0], 3);
  EXPECT_TRUE(j["values"][0][1].is_null());
  EXPECT_EQ(j["values"][1][0], 0);
  EXPECT_EQ(j["values"][1][1], 7);
}

TEST(Files, MetricsRoundTrip) {
  RunMetrics m{3, 10, 2, 0.2, {1, 0, 4}, {{0, 3, 2}, {2, 9, 0}}, 1, 1};
  EXPECT_EQ(metrics_from_json(nlohmann::json::parse(metrics_to_json(m).dump())), m);
}

TEST(Files, TrajectoryRoundTripAndValidation) {
  GridMap m = random_map(10, 10, 0.2, 3);
  Instance inst{m, random_starts(m, 15, ActionModel::Rotation, 3), ActionModel::Rotation};
  RunSettings s;
  s.total_steps = 40;
  s.planner.iterations_per_replan = 10;
  RunResult r = run_instance(inst, GuidanceGraph(m), s);
  std::stringstream ss;
  write_trajectory(ss, m, inst.model, r.sim.trajectory);
  TrajectoryFile f = parse_trajectory(ss, m);
  EXPECT_EQ(f.states, r.sim.trajectory);
  EXPECT_EQ(f.model, ActionModel::Rotation);
  EXPECT_FALSE(validate_trajectory(m, f.model, f.states).has_value());

  Trajectory bad = r.sim.trajectory;
  bad[5][1] = bad[5][0];
  EXPECT_TRUE(validate_trajectory(m, f.model, bad).has_value());
  Trajectory jump = r.sim.trajectory;
  std::swap(jump[7][0], jump[7][1]);
  EXPECT_TRUE(validate_trajectory(m, f.model, jump).has_value());

  std::istringstream truncated("lmapf-trajectory v1 height 10 width 10 agents 1 steps 2 model rotation\n0 0 E\n");
  EXPECT_THROW(parse_trajectory(truncated, m), ParseError);
  std::istringstream wrong_dims("lmapf-trajectory v1 height 9 width 10 agents 1 steps 0 model rotation\n0 0 E\n");
  EXPECT_THROW(parse_trajectory(wrong_dims, m), ParseError);
}

// ---------------------------------------------------------------------------
// Configs, sweeps and outputs

TEST(Config, ParsesAndResolvesRelativePaths) {
  RunConfig c = load_config(std::string(LMAPF_SOURCE_DIR) + "/data/random.json");
  EXPECT_EQ(fs::path(c.map_path), fs::path(LMAPF_SOURCE_DIR) / "data" / "random-32-32-20.map");
  EXPECT_EQ(c.settings.total_steps, 200);
  EXPECT_EQ(c.settings.planner.iterations_per_replan, 50);
  LoadedInstance li = load_instance(c);
  EXPECT_EQ(li.instance.agent_count(), 100);
  RunConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, ErrorsNameTheField) {
  auto message = [](const std::string& text) -> std::string {
    try {
      config_from_json(nlohmann::json::parse(text), "", "cfg");
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };
  EXPECT_NE(message(R"({"map":"m","agents":"a","wppl":{"windw":3}})").find("wppl.windw"), std::string::npos);
  EXPECT_NE(message(R"({"map":"m","agents":"a","wppl":{"window":"x"}})").find("wppl.window"), std::string::npos);
  EXPECT_NE(message(R"({"map":"m","agents":"a","algorithm":"astar"})").find("algorithm"), std::string::npos);
  EXPECT_NE(message(R"({"map":"m","agents":"a","wppl":{"disable":"random_k:x"}})").find("disable"),
            std::string::npos);
  EXPECT_NE(message(R"({"agents":"a"})").find("map"), std::string::npos);
  EXPECT_NE(message(R"({"map":"m","agents":"a","wppl":{"budget":{"mode":"forever"}}})").find("budget.mode"),
            std::string::npos);
  EXPECT_EQ(message(R"({"map":"m","agents":"a","wppl":{"disable":"random_k:5"}})"), "");
  EXPECT_EQ(parse_disable_policy("random_k:5").k, 5);
  EXPECT_EQ(to_string(parse_disable_policy("deadend_goals")), "deadend_goals");
}

TEST(Config, EnvironmentOverridesOutputDir) {
  RunConfig c;
  c.output_dir = "from-config";
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(effective_output_dir(c), "from-config");
  ::setenv(kOutputDirEnv, "/tmp/from-env", 1);
  EXPECT_EQ(effective_output_dir(c), "/tmp/from-env");
  ::unsetenv(kOutputDirEnv);
}

TEST(Config, ActionModelOverrideFacesEast) {
  RunConfig c = load_config(std::string(LMAPF_SOURCE_DIR) + "/data/random.json");
  c.action_model = ActionModel::FourWay;
  LoadedInstance li = load_instance(c);
  EXPECT_EQ(li.instance.model, ActionModel::FourWay);
  for (const auto& s : li.instance.starts) EXPECT_EQ(s.orientation, O::East);
}

TEST(Sweep, SingleValueEqualsPlainRun) {
  Instance inst{random_map(16, 16, 0.2, 6), {}, ActionModel::Rotation};
  inst.starts = random_starts(inst.map, 40, inst.model, 6);
  RunSettings base;
  base.total_steps = 60;
  base.planner.iterations_per_replan = 10;
  for (auto [p, v] : {std::pair{SweepParameter::Window, 4.0}, std::pair{SweepParameter::Agents, 30.0},
                      std::pair{SweepParameter::TimeBudget, 100.0}}) {
    auto rows = sweep(inst, GuidanceGraph(inst.map), base, p, {v});
    ASSERT_EQ(rows.size(), 1u);
    RunResult r = run_instance(inst, GuidanceGraph(inst.map), apply_sweep_value(base, p, v, 40));
    EXPECT_EQ(rows[0].metrics, r.sim.metrics) << to_string(p);
  }
  RunSettings s = apply_sweep_value(base, SweepParameter::Window, 2, 40);
  EXPECT_EQ(s.planner.replan_period, 2);
  s = apply_sweep_value(base, SweepParameter::Agents, 30, 40);
  EXPECT_EQ(s.planner.disable.k, 10);
  EXPECT_THROW(apply_sweep_value(base, SweepParameter::Agents, 41, 40), ConfigError);
  EXPECT_THROW(parse_sweep_parameter("speed"), ConfigError);

  auto rows = sweep(inst, GuidanceGraph(inst.map), base, SweepParameter::Window, {1, 3});
  std::stringstream ss;
  write_sweep_table(ss, SweepParameter::Window, rows);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "window\tthroughput\tgoals_reached\tsteps\tmean_planning_ms_per_step\tfirst_window_objective");
  int lines = 0;
  for (std::string l; std::getline(ss, l);) ++lines;
  EXPECT_EQ(lines, 2);
}

TEST(Outputs, RunWritesEveryFile) {
  RunConfig c = load_config(std::string(LMAPF_SOURCE_DIR) + "/data/random.json");
  c.settings.total_steps = 30;
  const fs::path dir = scratch_dir("outputs");
  c.output_dir = dir.string();
  RunResult r = run(c);
  for (const char* f : {"metrics.json", "heatmap.json", "trajectory.txt", "commit_log.json", "timing.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  auto metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
  EXPECT_EQ(metrics_from_json(metrics), r.sim.metrics);
  EXPECT_EQ(metrics["cycles"].size(), r.stats.cycles.size());
  LoadedInstance li = load_instance(c);
  TrajectoryFile t = load_trajectory((dir / "trajectory.txt").string(), li.instance.map);
  EXPECT_EQ(t.states, r.sim.trajectory);
  auto log = nlohmann::json::parse(slurp(dir / "commit_log.json"));
  EXPECT_EQ(log.size(), 10u * 50u);
}

// ---------------------------------------------------------------------------
// Command line

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(LMAPF_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, GenerateRunValidate) {
  const fs::path d = scratch_dir("cli");
  const std::string map = (d / "m.map").string(), agents = (d / "a.agents").string();
  ASSERT_EQ(cli("generate --kind random --height 12 --width 12 --agents 20 --seed 3 --map-out " + map +
                " --agents-out " + agents),
            0);
  ASSERT_EQ(cli("run --map " + map + " --agents " + agents + " --steps 40 --iterations 10 --output-dir " +
                (d / "out").string()),
            0);
  const std::string traj = (d / "out" / "trajectory.txt").string();
  EXPECT_EQ(cli("validate --map " + map + " --trajectory " + traj), 0);

  // Break one line so two agents share a cell.
  std::ifstream in(traj);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  std::istringstream first(lines[2]);
  std::vector<std::string> tok;
  for (std::string t; first >> t;) tok.push_back(t);
  tok[0] = tok[3];
  tok[1] = tok[4];
  lines[2].clear();
  for (const auto& t : tok) lines[2] += (lines[2].empty() ? "" : " ") + t;
  std::ofstream out(d / "bad.txt");
  for (const auto& l : lines) out << l << '\n';
  out.close();
  EXPECT_EQ(cli("validate --map " + map + " --trajectory " + (d / "bad.txt").string()), 1);

  ASSERT_EQ(cli("sweep --map " + map + " --agents " + agents + " --steps 20 --iterations 5 -p window -v 1,2 -o " +
                (d / "sweep.tsv").string()),
            0);
  EXPECT_NE(slurp(d / "sweep.tsv").find("window\tthroughput"), std::string::npos);
}

TEST(Cli, ErrorsExitNonZero) {
  EXPECT_EQ(cli("run --map /nonexistent.map --agents /nonexistent.agents"), 2);
  EXPECT_EQ(cli("run --config /nonexistent.json"), 2);
  EXPECT_NE(cli("frobnicate"), 0);
  EXPECT_EQ(cli("run -c " + std::string(LMAPF_SOURCE_DIR) + "/data/random.json --window 2 --replan-period 3"), 2);
}

TEST(Cli, RunMatchesLibrary) {
  const fs::path d = scratch_dir("cli_match");
  RunConfig c = load_config(std::string(LMAPF_SOURCE_DIR) + "/data/random.json");
  c.settings.total_steps = 50;
  c.output_dir = (d / "lib").string();
  RunResult r = run(c);
  ASSERT_EQ(cli("run -c " + std::string(LMAPF_SOURCE_DIR) + "/data/random.json --steps 50 --output-dir " +
                (d / "cli").string()),
            0);
  EXPECT_EQ(slurp(d / "cli" / "metrics.json"), slurp(d / "lib" / "metrics.json"));
  EXPECT_EQ(slurp(d / "cli" / "trajectory.txt"), slurp(d / "lib" / "trajectory.txt"));
  (void)r;
}
