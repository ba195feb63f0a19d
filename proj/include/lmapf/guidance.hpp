#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmapf/domain.hpp"

namespace lmapf {

// Positive edge weights over a grid: one weight per usable leaving direction
// of every free cell, plus a wait weight per free cell. Unusable directions
// and obstacle cells hold 0 and are never queried by the planners.
class GuidanceGraph {
 public:
  explicit GuidanceGraph(const GridMap& map)
      : height_(map.height()), width_(map.width()), move_(map.size(), {0, 0, 0, 0}), wait_(map.size(), 0.0) {
    for (int v = 0; v < map.size(); ++v) {
      if (!map.is_free(v)) continue;
      wait_[v] = 1.0;
      for (Orientation d : kOrientations)
        if (map.neighbor(v, d) >= 0) move_[v][index_of(d)] = 1.0;
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }

  double move(int v, Orientation d) const { return move_[v][index_of(d)]; }
  double wait(int v) const { return wait_[v]; }
  bool usable(int v, Orientation d) const { return move_[v][index_of(d)] > 0.0; }
  bool has_cell(int v) const { return wait_[v] > 0.0; }

  void set_move(int v, Orientation d, double w) {
    if (!usable(v, d)) throw std::invalid_argument("direction is not usable");
    check_weight(w);
    move_[v][index_of(d)] = w;
  }

  void set_wait(int v, double w) {
    if (!has_cell(v)) throw std::invalid_argument("cell is not free");
    check_weight(w);
    wait_[v] = w;
  }

  // Multiplies every weight by c > 0.
  GuidanceGraph scaled(double c) const {
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("scale must be positive");
    GuidanceGraph g = *this;
    for (auto& m : g.move_)
      for (double& w : m) w *= c;
    for (double& w : g.wait_) w *= c;
    return g;
  }

  friend bool operator==(const GuidanceGraph&, const GuidanceGraph&) = default;

 private:
  static void check_weight(double w) {
    if (!(w > 0.0) || !std::isfinite(w)) throw NonPositiveWeight("guidance weights must be finite and positive");
  }

  int height_;
  int width_;
  std::vector<std::array<double, 4>> move_;
  std::vector<double> wait_;
};

inline GuidanceGraph uniform_guidance(const GridMap& map) { return GuidanceGraph(map); }

// Alternating one-way preferences: even rows prefer East, odd rows West, even
// columns South, odd columns North. Waits keep weight 1.
inline GuidanceGraph crisscross_guidance(const GridMap& map, double preferred = 0.5, double penalized = 1.5) {
  if (!(preferred > 0.0) || preferred > penalized)
    throw std::invalid_argument("crisscross weights need 0 < preferred <= penalized");
  GuidanceGraph g(map);
  for (int v = 0; v < map.size(); ++v) {
    if (!map.is_free(v)) continue;
    const bool even_row = map.row(v) % 2 == 0, even_col = map.col(v) % 2 == 0;
    auto assign = [&](Orientation d, double w) {
      if (g.usable(v, d)) g.set_move(v, d, w);
    };
    assign(Orientation::East, even_row ? preferred : penalized);
    assign(Orientation::West, even_row ? penalized : preferred);
    assign(Orientation::South, even_col ? preferred : penalized);
    assign(Orientation::North, even_col ? penalized : preferred);
  }
  return g;
}

// Weight document:
//   {"format": "lmapf-guidance", "version": 1, "height": H, "width": W,
//    "wait":  H x W array (null on obstacles),
//    "moves": H x W array of [E, S, W, N] (null for the whole cell on
//             obstacles, null per direction where unusable)}
inline nlohmann::json weights_to_json(const GuidanceGraph& g) {
  using nlohmann::json;
  json wait = json::array(), moves = json::array();
  for (int r = 0; r < g.height(); ++r) {
    json wait_row = json::array(), move_row = json::array();
    for (int c = 0; c < g.width(); ++c) {
      int v = r * g.width() + c;
      if (!g.has_cell(v)) {
        wait_row.push_back(nullptr);
        move_row.push_back(nullptr);
        continue;
      }
      wait_row.push_back(g.wait(v));
      json dirs = json::array();
      for (Orientation d : kOrientations) {
        if (g.usable(v, d)) {
          dirs.push_back(g.move(v, d));
        } else {
          dirs.push_back(nullptr);
        }
      }
      move_row.push_back(std::move(dirs));
    }
    wait.push_back(std::move(wait_row));
    moves.push_back(std::move(move_row));
  }
  return {{"format", "lmapf-guidance"}, {"version", 1},          {"height", g.height()},
          {"width", g.width()},         {"wait", std::move(wait)}, {"moves", std::move(moves)}};
}

inline GuidanceGraph weights_from_json(const GridMap& map, const nlohmann::json& doc,
                                       const std::string& source = "<weights>") {
  auto fail = [&](const std::string& where, const std::string& what) -> void {
    throw ParseError(source, 0, where + ": " + what);
  };
  if (!doc.is_object()) fail("document", "expected an object");
  for (const char* key : {"height", "width", "wait", "moves"})
    if (!doc.contains(key)) fail(key, "missing field");
  if (!doc["height"].is_number_integer() || doc["height"].get<long long>() != map.height())
    fail("height", "does not match the map height " + std::to_string(map.height()));
  if (!doc["width"].is_number_integer() || doc["width"].get<long long>() != map.width())
    fail("width", "does not match the map width " + std::to_string(map.width()));
  const auto& wait = doc["wait"];
  const auto& moves = doc["moves"];
  if (!wait.is_array() || static_cast<int>(wait.size()) != map.height()) fail("wait", "expected H rows");
  if (!moves.is_array() || static_cast<int>(moves.size()) != map.height()) fail("moves", "expected H rows");

  auto read_weight = [&](const nlohmann::json& x, const std::string& where) {
    if (!x.is_number()) fail(where, "expected a number");
    double w = x.get<double>();
    if (!(w > 0.0) || !std::isfinite(w)) throw NonPositiveWeight(source + ": " + where + ": weight must be positive");
    return w;
  };

  GuidanceGraph g(map);
  for (int r = 0; r < map.height(); ++r) {
    const std::string wr = "wait[" + std::to_string(r) + "]", mr = "moves[" + std::to_string(r) + "]";
    if (!wait[r].is_array() || static_cast<int>(wait[r].size()) != map.width()) fail(wr, "expected W entries");
    if (!moves[r].is_array() || static_cast<int>(moves[r].size()) != map.width()) fail(mr, "expected W entries");
    for (int c = 0; c < map.width(); ++c) {
      const int v = map.vertex(r, c);
      const std::string wc = wr + "[" + std::to_string(c) + "]", mc = mr + "[" + std::to_string(c) + "]";
      const auto& wx = wait[r][c];
      const auto& mx = moves[r][c];
      if (!map.is_free(v)) {
        if (!wx.is_null()) fail(wc, "obstacle cells must be null");
        if (!mx.is_null()) fail(mc, "obstacle cells must be null");
        continue;
      }
      g.set_wait(v, read_weight(wx, wc));
      if (!mx.is_array() || mx.size() != 4) fail(mc, "expected [E, S, W, N]");
      for (Orientation d : kOrientations) {
        const auto& x = mx[index_of(d)];
        const std::string md = mc + "[" + std::to_string(index_of(d)) + "]";
        if (map.neighbor(v, d) < 0) {
          if (!x.is_null()) fail(md, "unusable direction must be null");
          continue;
        }
        g.set_move(v, d, read_weight(x, md));
      }
    }
  }
  return g;
}

inline void save_weights(const std::string& path, const GuidanceGraph& g) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write weight file " + path);
  out << weights_to_json(g).dump(1) << '\n';
}

inline GuidanceGraph load_weights(const GridMap& map, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open weight file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
  return weights_from_json(map, doc, path);
}

}  // namespace lmapf
