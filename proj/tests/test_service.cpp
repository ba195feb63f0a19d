#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "lmapf/service.hpp"

using namespace lmapf;
namespace fs = std::filesystem;

namespace {

RunConfig sample_config() {
  RunConfig c = load_config(std::string(LMAPF_SOURCE_DIR) + "/data/random.json");
  c.settings.total_steps = 40;
  c.settings.planner.iterations_per_replan = 10;
  c.weights_path.clear();
  return c;
}

nlohmann::json bad_weights(const Service& s) {
  nlohmann::json w = weights_to_json(s.weights());
  // First free cell's east move (or wait) set to zero.
  w["wait"][0][0] = 0;
  w["wait"][0][1] = 0;
  return w;
}

}  // namespace

TEST(Service, MapEndpoint) {
  Service s(sample_config());
  Response r = s.handle("GET", "/v1/map", "");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["format"], "lmapf-map");
  EXPECT_EQ(r.body["version"], 1);
  EXPECT_EQ(r.body["height"], 32);
  EXPECT_EQ(r.body["width"], 32);
  EXPECT_EQ(r.body["rows"].size(), 32u);
  EXPECT_EQ(r.body["rows"][0].get<std::string>().size(), 32u);
  EXPECT_EQ(r.body["agents"], 100);
  EXPECT_EQ(r.body["action_model"], "rotation");
}

TEST(Service, RoutingErrors) {
  Service s(sample_config());
  EXPECT_EQ(s.handle("GET", "/v1/nothing", "").status, 404);
  EXPECT_EQ(s.handle("DELETE", "/v1/map", "").status, 405);
  EXPECT_EQ(s.handle("GET", "/v1/simulate", "").status, 405);
  Response r = s.handle("POST", "/v1/simulate", "{not json");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"]["code"], "invalid_json");
  EXPECT_EQ(s.handle("POST", "/v1/simulate", R"({"steps":0})").status, 400);
  EXPECT_EQ(s.handle("POST", "/v1/simulate", R"({"seed":-1})").status, 400);
  EXPECT_EQ(s.handle("POST", "/v1/simulate", R"({"algorithm":"astar"})").status, 400);
  EXPECT_EQ(s.handle("POST", "/v1/simulate", R"({"speed":2})").body["error"]["code"], "bad_parameter");
  EXPECT_TRUE(s.runs().empty());
}

TEST(Service, WeightsRejectNonPositiveValuesAndKeepTheOverlay) {
  Service s(sample_config());
  const GuidanceGraph before = s.weights();
  Response r = s.handle("PUT", "/v1/weights", bad_weights(s).dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"]["code"], "invalid_weights");
  EXPECT_EQ(s.weights(), before);
  EXPECT_EQ(s.handle("PUT", "/v1/weights", "[").body["error"]["code"], "invalid_json");
  nlohmann::json wrong = weights_to_json(s.weights());
  wrong["height"] = 5;
  EXPECT_EQ(s.handle("PUT", "/v1/weights", wrong.dump()).status, 400);
}

TEST(Service, WeightsRoundTripAndChangeTheDigest) {
  Service s(sample_config());
  Response got = s.handle("GET", "/v1/weights", "");
  ASSERT_EQ(got.status, 200);
  EXPECT_EQ(weights_from_json(load_instance(sample_config()).instance.map, got.body), s.weights());

  Response a = s.handle("POST", "/v1/simulate", R"({"steps":30,"seed":1})");
  const GuidanceGraph cc = crisscross_guidance(load_instance(sample_config()).instance.map);
  Response put = s.handle("PUT", "/v1/weights", weights_to_json(cc).dump());
  ASSERT_EQ(put.status, 200);
  EXPECT_EQ(s.weights(), cc);
  Response b = s.handle("POST", "/v1/simulate", R"({"steps":30,"seed":1})");
  EXPECT_NE(a.body["config_digest"], b.body["config_digest"]);
}

TEST(Service, IdenticalSimulationsAgreeAndAreListedInOrder) {
  Service s(sample_config());
  Response a = s.handle("POST", "/v1/simulate", R"({"steps":40,"seed":3})");
  Response b = s.handle("POST", "/v1/simulate", R"({"steps":40,"seed":3})");
  Response c = s.handle("POST", "/v1/simulate", R"({"steps":40,"seed":4,"algorithm":"pibt"})");
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body["throughput"], b.body["throughput"]);
  EXPECT_EQ(a.body["heatmap"], b.body["heatmap"]);
  EXPECT_EQ(a.body["config_digest"], b.body["config_digest"]);
  EXPECT_EQ(a.body["heatmap"]["format"], "lmapf-heatmap");
  EXPECT_EQ(c.body["algorithm"], "pibt");

  Response runs = s.handle("GET", "/v1/runs", "");
  ASSERT_EQ(runs.body["runs"].size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(runs.body["runs"][i]["run_id"], i + 1);
  EXPECT_EQ(runs.body["runs"][2]["seed"], 4);
  EXPECT_EQ(runs.body["runs"][0]["throughput"], a.body["throughput"]);
}

TEST(Service, SimulateMatchesALibraryRunWithTheSameSettings) {
  RunConfig c = sample_config();
  Service s(c);
  Response r = s.handle("POST", "/v1/simulate", R"({"steps":40,"seed":5})");
  RunSettings settings = c.settings;
  settings.total_steps = 40;
  settings.seed = 5;
  LoadedInstance li = load_instance(c);
  RunResult lib = run_instance(li.instance, li.guidance, settings);
  EXPECT_EQ(r.body["goals_reached"], lib.sim.metrics.goals_reached);
  EXPECT_EQ(r.body["throughput"].get<double>(), lib.sim.metrics.throughput);
  EXPECT_EQ(r.body["heatmap"], heatmap_to_json(lib.sim.metrics.wait_usage, li.instance.map));
}

TEST(Service, SaveWritesTheOverlay) {
  const fs::path d = fs::temp_directory_path() / "lmapf_service_save";
  fs::remove_all(d);
  fs::create_directories(d);
  Service s(sample_config());
  EXPECT_EQ(s.handle("POST", "/v1/weights/save", "{}").status, 400);  // no configured path
  const GuidanceGraph cc = crisscross_guidance(load_instance(sample_config()).instance.map);
  ASSERT_EQ(s.handle("PUT", "/v1/weights", weights_to_json(cc).dump()).status, 200);
  const std::string path = (d / "w.json").string();
  Response r = s.handle("POST", "/v1/weights/save", nlohmann::json{{"path", path}}.dump());
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["path"], path);
  EXPECT_EQ(load_weights(load_instance(sample_config()).instance.map, path), cc);

  // The saved file is usable as a run config's weight file.
  RunConfig c = sample_config();
  c.weights_path = path;
  EXPECT_EQ(load_instance(c).guidance, cc);
}

TEST(Service, OverHttp) {
  Service s(sample_config());
  httplib::Server server;
  bind_service(server, s);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto map = client.Get("/v1/map");
  ASSERT_TRUE(map);
  EXPECT_EQ(map->status, 200);
  EXPECT_EQ(nlohmann::json::parse(map->body)["width"], 32);

  auto bad = client.Put("/v1/weights", bad_weights(s).dump(), "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto sim = client.Post("/v1/simulate", R"({"steps":20,"seed":2})", "application/json");
  ASSERT_TRUE(sim);
  EXPECT_EQ(sim->status, 200);
  auto sim_body = nlohmann::json::parse(sim->body);
  EXPECT_EQ(sim_body["run_id"], 1);

  auto runs = client.Get("/v1/runs");
  ASSERT_TRUE(runs);
  EXPECT_EQ(nlohmann::json::parse(runs->body)["runs"].size(), 1u);

  auto missing = client.Get("/v1/unknown");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  server.stop();
  t.join();
}

TEST(Service, ServeAndRunAgree) {
  // The CLI run and the service use the same settings path, so the same seed
  // gives the same throughput.
  const fs::path d = fs::temp_directory_path() / "lmapf_service_cli";
  fs::remove_all(d);
  RunConfig c = sample_config();
  Service s(c);
  Response r = s.handle("POST", "/v1/simulate", R"({"steps":40,"seed":1})");
  const std::string cmd = std::string(LMAPF_CLI) + " run -c " + LMAPF_SOURCE_DIR +
                          "/data/random.json --steps 40 --seed 1 --iterations 10 --output-dir " + d.string() +
                          " > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  std::ifstream in(d / "metrics.json");
  auto metrics = nlohmann::json::parse(in);
  EXPECT_EQ(metrics["throughput"].get<double>(), r.body["throughput"].get<double>());
  EXPECT_EQ(metrics["goals_reached"], r.body["goals_reached"]);
}
