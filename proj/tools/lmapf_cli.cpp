// lmapf: run, sweep, serve, validate and generate.

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lmapf/experiment.hpp"
#include "lmapf/io.hpp"
#include "lmapf/maps.hpp"
#include "lmapf/service.hpp"
#include "lmapf/simulator.hpp"

namespace {

// Flags that override fields of the config file.
struct Overrides {
  std::string map, agents, weights, guidance, algorithm, action_model, output_dir, disable, budget_mode;
  std::optional<int> steps, window, replan_period, workers, neighborhood_size;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> iterations, total_iterations;
  std::optional<double> step_time_ms;
  std::optional<bool> reuse;

  void attach(CLI::App* app) {
    app->add_option("--map", map, "Map file");
    app->add_option("--agents", agents, "Agent file");
    app->add_option("--weights", weights, "Guidance weight file");
    app->add_option("--guidance", guidance, "uniform or crisscross when no weight file is given");
    app->add_option("--algorithm", algorithm, "wppl or pibt");
    app->add_option("--action-model", action_model, "rotation or fourway");
    app->add_option("--output-dir", output_dir, "Output directory");
    app->add_option("--steps", steps, "Total simulated steps");
    app->add_option("--seed", seed, "Root seed");
    app->add_option("--window", window, "Planning window w");
    app->add_option("--replan-period", replan_period, "Replan period h");
    app->add_option("--budget-mode", budget_mode, "iterations or wall_time");
    app->add_option("--iterations", iterations, "LNS iterations per replan");
    app->add_option("--total-iterations", total_iterations, "LNS iterations per run, split over replans");
    app->add_option("--step-time-ms", step_time_ms, "Planning time per step in wall-time mode");
    app->add_option("--workers", workers, "LNS worker threads");
    app->add_option("--neighborhood-size", neighborhood_size, "Agents per LNS neighborhood");
    app->add_option("--reuse", reuse, "Reuse the previous plan tail (true/false)");
    app->add_option("--disable", disable, "none, deadend_goals or random_k:<k>");
  }

  lmapf::RunConfig apply(lmapf::RunConfig c) const {
    using namespace lmapf;
    if (!map.empty()) c.map_path = map;
    if (!agents.empty()) c.agents_path = agents;
    if (!weights.empty()) c.weights_path = weights;
    if (!guidance.empty()) {
      if (guidance != "uniform" && guidance != "crisscross")
        throw ConfigError("--guidance: expected 'uniform' or 'crisscross'");
      c.guidance = guidance;
    }
    if (!algorithm.empty()) c.settings.planner.algorithm = detail::parse_algorithm(algorithm, "--algorithm");
    if (!action_model.empty()) c.action_model = detail::parse_action_model(action_model, "--action-model");
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (!disable.empty()) c.settings.planner.disable = parse_disable_policy(disable, "--disable");
    if (!budget_mode.empty()) {
      if (budget_mode == "iterations")
        c.settings.planner.budget_mode = BudgetMode::Iterations;
      else if (budget_mode == "wall_time")
        c.settings.planner.budget_mode = BudgetMode::WallTime;
      else
        throw ConfigError("--budget-mode: expected 'iterations' or 'wall_time'");
    }
    if (steps) c.settings.total_steps = *steps;
    if (seed) c.settings.seed = *seed;
    if (window) c.settings.planner.window = *window;
    if (replan_period) c.settings.planner.replan_period = *replan_period;
    if (workers) c.settings.planner.workers = *workers;
    if (neighborhood_size) c.settings.planner.neighborhood_size = *neighborhood_size;
    if (iterations) c.settings.planner.iterations_per_replan = *iterations;
    if (total_iterations) c.settings.total_iterations = *total_iterations;
    if (step_time_ms) c.settings.planner.step_time_ms = *step_time_ms;
    if (reuse) c.settings.planner.reuse = *reuse;
    if (c.map_path.empty()) throw ConfigError("no map given (config file or --map)");
    if (c.agents_path.empty()) throw ConfigError("no agent file given (config file or --agents)");
    return c;
  }
};

lmapf::RunConfig make_config(const std::string& path, const Overrides& o) {
  lmapf::RunConfig c;
  if (!path.empty()) c = lmapf::load_config(path);
  return o.apply(std::move(c));
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t next = text.find(',', pos);
    std::string item = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw lmapf::ConfigError("--values: '" + item + "' is not a number");
    out.push_back(v);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifelong multi-agent path finding with rotations"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;

  auto* run = app.add_subcommand("run", "Simulate one configuration and write its outputs");
  run->add_option("-c,--config", config_path, "Run config (JSON)");
  overrides.attach(run);

  std::string param, values_text, table_path;
  auto* sweep = app.add_subcommand("sweep", "Run one configuration over a list of parameter values");
  sweep->add_option("-c,--config", config_path, "Run config (JSON)");
  sweep->add_option("-p,--param", param, "window, agents or time_budget")->required();
  sweep->add_option("-v,--values", values_text, "Comma-separated values")->required();
  sweep->add_option("-o,--table", table_path, "Output table (default: <output dir>/sweep_<param>.tsv or stdout)");
  overrides.attach(sweep);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the guidance-tuning endpoints");
  serve->add_option("-c,--config", config_path, "Run config (JSON)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  overrides.attach(serve);

  std::string map_path, trajectory_path;
  auto* validate = app.add_subcommand("validate", "Re-check a trajectory file against a map");
  validate->add_option("--map", map_path, "Map file")->required();
  validate->add_option("--trajectory", trajectory_path, "Trajectory file")->required();

  std::string kind = "random", out_map, out_agents, gen_model = "rotation";
  int height = 32, width = 32, agent_count = 100;
  double obstacles = 0.2;
  std::uint64_t gen_seed = 0;
  auto* generate = app.add_subcommand("generate", "Write a generated map and random start file");
  generate->add_option("--kind", kind, "random or warehouse");
  generate->add_option("--height", height, "Rows (random maps)");
  generate->add_option("--width", width, "Columns (random maps)");
  generate->add_option("--obstacles", obstacles, "Obstacle ratio (random maps)");
  generate->add_option("--agents", agent_count, "Number of agents");
  generate->add_option("--action-model", gen_model, "rotation or fourway");
  generate->add_option("--seed", gen_seed, "Seed");
  generate->add_option("--map-out", out_map, "Map output path")->required();
  generate->add_option("--agents-out", out_agents, "Agent output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      lmapf::RunConfig c = make_config(config_path, overrides);
      lmapf::RunResult r = lmapf::run(c);
      const auto& m = r.sim.metrics;
      std::cout << "steps " << m.steps << " goals " << m.goals_reached << " throughput " << m.throughput
                << " overrun_steps " << m.overrun_steps << '\n';
      const std::string dir = lmapf::effective_output_dir(c);
      if (!dir.empty()) std::cout << "outputs written to " << dir << '\n';
    } else if (*sweep) {
      lmapf::RunConfig c = make_config(config_path, overrides);
      const auto p = lmapf::parse_sweep_parameter(param);
      const auto values = parse_values(values_text);
      lmapf::LoadedInstance li = lmapf::load_instance(c);
      auto rows = lmapf::sweep(li.instance, li.guidance, c.settings, p, values);
      std::string target = table_path;
      const std::string dir = lmapf::effective_output_dir(c);
      if (target.empty() && !dir.empty()) {
        std::filesystem::create_directories(dir);
        target = (std::filesystem::path(dir) / ("sweep_" + param + ".tsv")).string();
      }
      if (target.empty()) {
        lmapf::write_sweep_table(std::cout, p, rows);
      } else {
        std::ofstream out(target);
        if (!out) throw lmapf::Error("cannot write " + target);
        lmapf::write_sweep_table(out, p, rows);
        std::cout << "table written to " << target << '\n';
      }
    } else if (*serve) {
      lmapf::RunConfig c = make_config(config_path, overrides);
      lmapf::Service service(c);
      httplib::Server server;
      lmapf::bind_service(server, service);
      std::cout << "serving on http://" << host << ':' << port << "/v1" << std::endl;
      if (!server.listen(host, port)) throw lmapf::Error("cannot listen on " + host + ":" + std::to_string(port));
    } else if (*validate) {
      lmapf::GridMap map = lmapf::load_map(map_path);
      lmapf::TrajectoryFile t = lmapf::load_trajectory(trajectory_path, map);
      if (auto defect = lmapf::validate_trajectory(map, t.model, t.states)) {
        std::cerr << trajectory_path << ": " << *defect << '\n';
        return 1;
      }
      std::cout << trajectory_path << ": ok (" << (t.states.empty() ? 0 : t.states.size() - 1) << " steps, "
                << (t.states.empty() ? 0 : t.states.front().size()) << " agents)\n";
    } else if (*generate) {
      const auto model = lmapf::detail::parse_action_model(gen_model, "--action-model");
      lmapf::GridMap map = kind == "warehouse" ? lmapf::warehouse_map()
                           : kind == "random"  ? lmapf::random_map(height, width, obstacles, gen_seed)
                                               : throw lmapf::ConfigError("--kind: expected 'random' or 'warehouse'");
      lmapf::save_map(out_map, map);
      lmapf::save_agents(out_agents, map, lmapf::random_starts(map, agent_count, model, gen_seed), model);
    }
  } catch (const lmapf::InvalidJointAction& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
