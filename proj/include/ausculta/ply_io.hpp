#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ausculta/errors.hpp"
#include "ausculta/pointcloud.hpp"

namespace ausculta {

/// ASCII PLY with float x,y,z and, when the cloud carries colors, uchar
/// red,green,blue.
inline void save_ply(const std::string& path, const PointCloud& cloud) {
  cloud.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_ply: cannot open " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "comment frame " << (cloud.frame_tag.empty() ? "unknown" : cloud.frame_tag) << "\n";
  out << "element vertex " << cloud.points.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (cloud.has_colors())
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  char line[160];
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    if (cloud.has_colors()) {
      const auto& c = cloud.colors[i];
      std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %d %d %d\n", static_cast<float>(p.x()),
                    static_cast<float>(p.y()), static_cast<float>(p.z()), c[0], c[1], c[2]);
    } else {
      std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", static_cast<float>(p.x()),
                    static_cast<float>(p.y()), static_cast<float>(p.z()));
    }
    out << line;
  }
  if (!out) throw std::runtime_error("save_ply: write failed for " + path);
}

inline PointCloud load_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_ply: cannot open " + path);

  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError("load_ply: missing 'ply' magic", line_no);
  if (!next_line() || line != "format ascii 1.0")
    throw ParseError("load_ply: only 'format ascii 1.0' is supported", line_no);

  long vertex_count = -1;
  std::vector<std::string> properties;
  std::string frame_tag;
  bool in_vertex_element = false;
  while (true) {
    if (!next_line()) throw ParseError("load_ply: header ended before end_header", line_no);
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "comment") {
      std::string key;
      ss >> key;
      if (key == "frame") ss >> frame_tag;
    } else if (word == "element") {
      std::string name;
      long count = 0;
      if (!(ss >> name >> count)) throw ParseError("load_ply: malformed element line", line_no);
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
    } else if (word == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      if (!(ss >> type >> name)) throw ParseError("load_ply: malformed property line", line_no);
      properties.push_back(name);
    } else if (word.empty()) {
      continue;
    } else {
      throw ParseError("load_ply: unrecognized header keyword '" + word + "'", line_no);
    }
  }
  if (vertex_count < 0) throw ParseError("load_ply: no vertex element declared", line_no);

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  for (int i = 0; i < static_cast<int>(properties.size()); ++i) {
    if (properties[i] == "x") ix = i;
    if (properties[i] == "y") iy = i;
    if (properties[i] == "z") iz = i;
    if (properties[i] == "red") ir = i;
    if (properties[i] == "green") ig = i;
    if (properties[i] == "blue") ib = i;
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw ParseError("load_ply: vertex element lacks x/y/z properties", line_no);
  const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;

  PointCloud cloud;
  cloud.frame_tag = frame_tag;
  cloud.points.reserve(vertex_count);
  if (has_color) cloud.colors.reserve(vertex_count);
  std::vector<double> values(properties.size());
  for (long n = 0; n < vertex_count; ++n) {
    if (!next_line())
      throw ParseError("load_ply: expected " + std::to_string(vertex_count) + " vertices, got " +
                           std::to_string(n),
                       line_no);
    std::istringstream ss(line);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(ss >> values[i]))
        throw ParseError("load_ply: vertex line has fewer fields than declared properties", line_no);
    }
    cloud.points.emplace_back(values[ix], values[iy], values[iz]);
    if (has_color)
      cloud.colors.push_back({static_cast<std::uint8_t>(values[ir]),
                              static_cast<std::uint8_t>(values[ig]),
                              static_cast<std::uint8_t>(values[ib])});
  }
  return cloud;
}

}  // namespace ausculta
