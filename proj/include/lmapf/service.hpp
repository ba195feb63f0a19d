#pragma once

#include <cstdint>
#include <iomanip>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "lmapf/experiment.hpp"
#include "lmapf/guidance.hpp"
#include "lmapf/rng.hpp"

namespace lmapf {

struct Response {
  int status = 200;
  nlohmann::json body;
};

struct RunRecord {
  int run_id = 0;
  std::string config_digest;
  std::string algorithm;
  std::uint64_t seed = 0;
  int steps = 0;
  double throughput = 0.0;
};

inline std::string hex_digest(std::string_view text) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(text);
  return ss.str();
}

// Request/response core of the tuning service, independent of the socket
// layer. Bodies are JSON; every route lives under /v1. The weight overlay is
// held in memory and only written to disk on an explicit save.
class Service {
 public:
  explicit Service(const RunConfig& config) : Service(config, load_instance(config)) {}

  Service(RunConfig config, LoadedInstance loaded)
      : config_(std::move(config)), loaded_(std::move(loaded)), overlay_(loaded_.guidance) {}

  Response handle(const std::string& method, const std::string& path, const std::string& body) {
    try {
      if (path == "/v1/map" && method == "GET") return get_map();
      if (path == "/v1/weights" && method == "GET") return get_weights();
      if (path == "/v1/weights" && method == "PUT") return put_weights(body);
      if (path == "/v1/weights/save" && method == "POST") return save(body);
      if (path == "/v1/simulate" && method == "POST") return simulate_run(body);
      if (path == "/v1/runs" && method == "GET") return get_runs();
      for (const char* known : {"/v1/map", "/v1/weights", "/v1/weights/save", "/v1/simulate", "/v1/runs"})
        if (path == known) return error(405, "method_not_allowed", method + " is not supported on " + path);
      return error(404, "not_found", "no route " + path);
    } catch (const std::exception& e) {
      return error(500, "internal", e.what());
    }
  }

  GuidanceGraph weights() const {
    std::shared_lock lock(overlay_mutex_);
    return overlay_;
  }

  std::vector<RunRecord> runs() const {
    std::shared_lock lock(runs_mutex_);
    return runs_;
  }

 private:
  static Response error(int status, const std::string& code, const std::string& message) {
    return {status, {{"error", {{"code", code}, {"message", message}}}}};
  }

  static std::optional<nlohmann::json> parse_body(const std::string& body) {
    if (body.empty()) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      return std::nullopt;
    }
  }

  Response get_map() const {
    const GridMap& map = loaded_.instance.map;
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < map.height(); ++r) {
      std::string row;
      for (int c = 0; c < map.width(); ++c) row += map.is_free(r, c) ? '.' : '@';
      rows.push_back(row);
    }
    return {200,
            {{"format", "lmapf-map"},
             {"version", 1},
             {"height", map.height()},
             {"width", map.width()},
             {"rows", std::move(rows)},
             {"agents", loaded_.instance.agent_count()},
             {"action_model", to_string(loaded_.instance.model)}}};
  }

  Response get_weights() const { return {200, weights_to_json(weights())}; }

  Response put_weights(const std::string& body) {
    auto doc = parse_body(body);
    if (!doc) return error(400, "invalid_json", "request body is not valid JSON");
    try {
      GuidanceGraph g = weights_from_json(loaded_.instance.map, *doc, "body");
      std::unique_lock lock(overlay_mutex_);
      overlay_ = std::move(g);
    } catch (const NonPositiveWeight& e) {
      return error(400, "invalid_weights", e.what());
    } catch (const ParseError& e) {
      return error(400, "invalid_weights", e.what());
    }
    return {200, {{"ok", true}, {"digest", hex_digest(weights_to_json(weights()).dump())}}};
  }

  Response save(const std::string& body) {
    auto doc = parse_body(body);
    if (!doc || !doc->is_object()) return error(400, "invalid_json", "request body must be a JSON object");
    std::string path = config_.weights_path;
    if (doc->contains("path")) {
      if (!(*doc)["path"].is_string()) return error(400, "bad_parameter", "path: expected a string");
      path = (*doc)["path"].get<std::string>();
    }
    if (path.empty()) return error(400, "bad_parameter", "path: no weight file configured; pass one");
    save_weights(path, weights());
    return {200, {{"ok", true}, {"path", path}}};
  }

  Response simulate_run(const std::string& body) {
    auto doc = parse_body(body);
    if (!doc || !doc->is_object()) return error(400, "invalid_json", "request body must be a JSON object");
    RunSettings s = config_.settings;
    try {
      for (auto it = doc->begin(); it != doc->end(); ++it)
        if (it.key() != "steps" && it.key() != "seed" && it.key() != "algorithm")
          return error(400, "bad_parameter", it.key() + ": unknown field");
      if (doc->contains("steps")) {
        const auto& x = (*doc)["steps"];
        if (!x.is_number_integer() || x.get<long long>() < 1 || x.get<long long>() > 1000000)
          return error(400, "bad_parameter", "steps: expected an integer in [1, 1000000]");
        s.total_steps = x.get<int>();
      }
      if (doc->contains("seed")) {
        const auto& x = (*doc)["seed"];
        if (!x.is_number_unsigned() && !(x.is_number_integer() && x.get<long long>() >= 0))
          return error(400, "bad_parameter", "seed: expected a non-negative integer");
        s.seed = x.get<std::uint64_t>();
      }
      if (doc->contains("algorithm")) {
        const auto& x = (*doc)["algorithm"];
        if (!x.is_string()) return error(400, "bad_parameter", "algorithm: expected 'wppl' or 'pibt'");
        s.planner.algorithm = detail::parse_algorithm(x.get<std::string>(), "algorithm");
      }
      planner_config(s, loaded_.instance.agent_count());
    } catch (const std::exception& e) {
      return error(400, "bad_parameter", e.what());
    }
    s.record_trajectory = false;

    std::lock_guard sim_lock(simulate_mutex_);
    const GuidanceGraph g = weights();
    RunConfig echo = config_;
    echo.settings = s;
    echo.output_dir.clear();
    nlohmann::json digest_doc = {{"config", config_to_json(echo)}, {"weights", weights_to_json(g)}};
    const std::string digest = hex_digest(digest_doc.dump());
    RunResult r = run_instance(loaded_.instance, g, s);

    RunRecord rec{0, digest, to_string(s.planner.algorithm), s.seed, r.sim.metrics.steps, r.sim.metrics.throughput};
    {
      std::unique_lock lock(runs_mutex_);
      rec.run_id = static_cast<int>(runs_.size()) + 1;
      runs_.push_back(rec);
    }
    return {200,
            {{"run_id", rec.run_id},
             {"config_digest", digest},
             {"algorithm", rec.algorithm},
             {"seed", rec.seed},
             {"steps", r.sim.metrics.steps},
             {"goals_reached", r.sim.metrics.goals_reached},
             {"throughput", r.sim.metrics.throughput},
             {"heatmap", heatmap_to_json(r.sim.metrics.wait_usage, loaded_.instance.map)}}};
  }

  Response get_runs() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : runs())
      list.push_back({{"run_id", r.run_id},
                      {"config_digest", r.config_digest},
                      {"algorithm", r.algorithm},
                      {"seed", r.seed},
                      {"steps", r.steps},
                      {"throughput", r.throughput}});
    return {200, {{"runs", std::move(list)}}};
  }

  RunConfig config_;
  LoadedInstance loaded_;
  mutable std::shared_mutex overlay_mutex_;
  GuidanceGraph overlay_;
  mutable std::shared_mutex runs_mutex_;
  std::vector<RunRecord> runs_;
  std::mutex simulate_mutex_;
};

// Routes every /v1 request of `server` to `service`.
inline void bind_service(httplib::Server& server, Service& service) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    Response r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get(R"(/v1/.*)", forward);
  server.Put(R"(/v1/.*)", forward);
  server.Post(R"(/v1/.*)", forward);
  server.Delete(R"(/v1/.*)", forward);
}

}  // namespace lmapf
