#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lmapf/domain.hpp"

namespace lmapf {

namespace detail {

inline bool read_line(std::istream& in, std::string& line, int& line_no) {
  if (!std::getline(in, line)) return false;
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline int parse_header_int(std::istream& in, const std::string& source, int& line_no, const std::string& key) {
  std::string line;
  if (!read_line(in, line, line_no)) throw ParseError(source, line_no + 1, "missing '" + key + "' line");
  std::istringstream ss(line);
  std::string word;
  long long value = 0;
  std::string rest;
  if (!(ss >> word) || word != key || !(ss >> value) || (ss >> rest))
    throw ParseError(source, line_no, "expected '" + key + " <positive integer>'");
  if (value < 1 || value > 1'000'000) throw ParseError(source, line_no, key + " must be a positive integer");
  return static_cast<int>(value);
}

}  // namespace detail

// Octile map text: `type octile`, `height H`, `width W`, `map`, then H rows of
// W characters; '.' is free, '@' and 'T' are obstacles.
inline GridMap parse_map(std::istream& in, const std::string& source = "<map>") {
  int line_no = 0;
  std::string line;
  if (!detail::read_line(in, line, line_no) || line != "type octile")
    throw ParseError(source, line_no == 0 ? 1 : line_no, "expected 'type octile'");
  int height = detail::parse_header_int(in, source, line_no, "height");
  int width = detail::parse_header_int(in, source, line_no, "width");
  if (!detail::read_line(in, line, line_no) || line != "map")
    throw ParseError(source, line_no, "expected 'map'");
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    if (!detail::read_line(in, line, line_no))
      throw ParseError(source, line_no + 1, "missing map row " + std::to_string(r));
    if (static_cast<int>(line.size()) != width)
      throw ParseError(source, line_no,
                       "row has " + std::to_string(line.size()) + " cells, expected " + std::to_string(width));
    for (int c = 0; c < width; ++c) {
      char ch = line[c];
      if (ch == '.') {
        cells.push_back(Cell::Free);
      } else if (ch == '@' || ch == 'T') {
        cells.push_back(Cell::Obstacle);
      } else {
        throw ParseError(source, line_no, std::string("unknown cell character '") + ch + "' at column " +
                                              std::to_string(c + 1));
      }
    }
  }
  while (detail::read_line(in, line, line_no))
    if (!line.empty()) throw ParseError(source, line_no, "unexpected content after the last map row");
  try {
    return GridMap(height, width, std::move(cells));
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, 0, e.what());
  }
}

inline GridMap load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open map file");
  return parse_map(in, path);
}

inline void write_map(std::ostream& out, const GridMap& map) {
  out << "type octile\nheight " << map.height() << "\nwidth " << map.width() << "\nmap\n";
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) out << (map.is_free(r, c) ? '.' : '@');
    out << '\n';
  }
}

inline void save_map(const std::string& path, const GridMap& map) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write map file " + path);
  write_map(out, map);
}

struct AgentFile {
  std::vector<AgentState> starts;
  ActionModel model = ActionModel::Rotation;
};

// One agent per line: `row col orientation` (rotation model) or `row col`
// (four-way model). All lines must use the same form. Blank lines and lines
// starting with '#' are skipped.
inline AgentFile parse_agents(std::istream& in, const GridMap& map, const std::string& source = "<agents>") {
  AgentFile out;
  int line_no = 0;
  int columns = 0;
  std::string line;
  std::vector<char> taken(map.size(), 0);
  while (detail::read_line(in, line, line_no)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    if (fields.size() != 2 && fields.size() != 3)
      throw ParseError(source, line_no, "expected 'row col [orientation]'");
    if (columns == 0) columns = static_cast<int>(fields.size());
    if (static_cast<int>(fields.size()) != columns)
      throw ParseError(source, line_no, "all agents must use the same column layout");
    int row = 0, col = 0;
    try {
      std::size_t used = 0;
      row = std::stoi(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("row");
      col = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("col");
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "row and col must be integers");
    }
    if (!map.is_free(row, col)) throw ParseError(source, line_no, "start cell is blocked or out of bounds");
    int v = map.vertex(row, col);
    if (taken[v]) throw ParseError(source, line_no, "start cell already used by another agent");
    taken[v] = 1;
    Orientation o = Orientation::East;
    if (columns == 3) {
      auto parsed = fields[2].size() == 1 ? orientation_from_char(fields[2][0]) : std::nullopt;
      if (!parsed) throw ParseError(source, line_no, "orientation must be one of E, S, W, N");
      o = *parsed;
    }
    out.starts.push_back({v, o});
  }
  if (out.starts.empty()) throw ParseError(source, line_no, "agent file lists no agents");
  out.model = columns == 3 ? ActionModel::Rotation : ActionModel::FourWay;
  return out;
}

inline AgentFile load_agents(const std::string& path, const GridMap& map) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open agent file");
  return parse_agents(in, map, path);
}

inline void write_agents(std::ostream& out, const GridMap& map, const std::vector<AgentState>& starts,
                         ActionModel model) {
  for (const auto& s : starts) {
    out << map.row(s.location) << ' ' << map.col(s.location);
    if (model == ActionModel::Rotation) out << ' ' << to_char(s.orientation);
    out << '\n';
  }
}

inline void save_agents(const std::string& path, const GridMap& map, const std::vector<AgentState>& starts,
                        ActionModel model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write agent file " + path);
  write_agents(out, map, starts, model);
}

}  // namespace lmapf
