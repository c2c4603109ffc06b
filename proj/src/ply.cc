#include "lpm/ply.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace lpm {

namespace {

static_assert(std::endian::native == std::endian::little,
              "PLY payload is written with native little-endian layout");

const std::map<std::string, int>& type_sizes() {
  static const std::map<std::string, int> sizes = {
      {"char", 1},  {"uchar", 1},  {"int8", 1},    {"uint8", 1},   {"short", 2},
      {"ushort", 2}, {"int16", 2},  {"uint16", 2}, {"int", 4},     {"uint", 4},
      {"int32", 4}, {"uint32", 4}, {"float", 4},   {"float32", 4}, {"double", 8},
      {"float64", 8}};
  return sizes;
}

}  // namespace

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PlyError(PlyErrc::write_failed, "cannot write '" + path.string() + "'");
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  std::vector<char> buf(cloud.points.size() * 15);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    char* p = buf.data() + i * 15;
    std::memcpy(p, cloud.points[i].data(), 12);
    const auto c = i < cloud.colors.size() ? cloud.colors[i] : std::array<std::uint8_t, 3>{};
    std::memcpy(p + 12, c.data(), 3);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw PlyError(PlyErrc::write_failed, "short write to '" + path.string() + "'");
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PlyError(PlyErrc::open_failed, "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "ply") {
    throw PlyError(PlyErrc::bad_header, "'" + path.string() + "' is not a PLY file");
  }
  std::size_t count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  bool seen_format = false;
  int stride = 0;
  std::map<std::string, std::pair<int, std::string>> props;  // name -> (offset, type)
  while (true) {
    if (!std::getline(in, line)) throw PlyError(PlyErrc::bad_header, "unterminated PLY header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream is(line);
    std::string word;
    is >> word;
    if (word == "end_header") break;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt;
      is >> fmt;
      if (fmt != "binary_little_endian") {
        throw PlyError(PlyErrc::bad_header, "unsupported PLY format '" + fmt + "'");
      }
      seen_format = true;
    } else if (word == "element") {
      std::string name;
      long long n = -1;
      is >> name >> n;
      if (!is || n < 0) throw PlyError(PlyErrc::bad_header, "bad element line '" + line + "'");
      if (seen_vertex) throw PlyError(PlyErrc::bad_header, "only a vertex element is supported");
      if (name != "vertex") throw PlyError(PlyErrc::bad_header, "unexpected element '" + name + "'");
      in_vertex = seen_vertex = true;
      count = static_cast<std::size_t>(n);
    } else if (word == "property") {
      std::string type, name;
      is >> type >> name;
      if (!in_vertex || type == "list") {
        throw PlyError(PlyErrc::bad_header, "unsupported property line '" + line + "'");
      }
      auto sz = type_sizes().find(type);
      if (sz == type_sizes().end() || name.empty()) {
        throw PlyError(PlyErrc::bad_header, "unknown property type in '" + line + "'");
      }
      props[name] = {stride, type};
      stride += sz->second;
    } else {
      throw PlyError(PlyErrc::bad_header, "unexpected header line '" + line + "'");
    }
  }
  if (!seen_format || !seen_vertex) throw PlyError(PlyErrc::bad_header, "incomplete PLY header");
  for (const char* axis : {"x", "y", "z"}) {
    auto it = props.find(axis);
    if (it == props.end() || (it->second.second != "float" && it->second.second != "float32")) {
      throw PlyError(PlyErrc::bad_header, std::string("missing float property '") + axis + "'");
    }
  }
  const bool has_color = props.count("red") && props.count("green") && props.count("blue");

  PointCloud cloud;
  cloud.points.resize(count);
  cloud.colors.resize(count);
  std::vector<char> row(stride);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(row.data(), stride);
    if (in.gcount() != stride) throw PlyError(PlyErrc::truncated, "truncated PLY payload");
    for (int a = 0; a < 3; ++a) {
      std::memcpy(&cloud.points[i][a], row.data() + props[std::string(1, "xyz"[a])].first, 4);
    }
    if (has_color) {
      const char* names[3] = {"red", "green", "blue"};
      for (int c = 0; c < 3; ++c) {
        const auto& [off, type] = props[names[c]];
        cloud.colors[i][c] = static_cast<std::uint8_t>(row[off]);
        if (type != "uchar" && type != "uint8") cloud.colors[i][c] = 0;
      }
    }
  }
  return cloud;
}

}  // namespace lpm
