#pragma once

// Binary little-endian splat PLY reader/writer.
//
// Vertex layout written: x y z nx ny nz f_dc_0..2 f_rest_0..44 opacity
// scale_0..2 rot_0..3 [object_id]. f_rest is channel-major on disk
// (all 15 red coefficients, then green, then blue).

#include "splatsim/io/gaussian_scene.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace splatsim {

static_assert(std::endian::native == std::endian::little, "splat PLY I/O assumes a little-endian host");

namespace ply_detail {

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
  }
  return 0;
}

inline ScalarType parse_type(const std::string& s) {
  static const std::unordered_map<std::string, ScalarType> kTypes = {
      {"char", ScalarType::Int8},     {"int8", ScalarType::Int8},       {"uchar", ScalarType::UInt8},
      {"uint8", ScalarType::UInt8},   {"short", ScalarType::Int16},     {"int16", ScalarType::Int16},
      {"ushort", ScalarType::UInt16}, {"uint16", ScalarType::UInt16},   {"int", ScalarType::Int32},
      {"int32", ScalarType::Int32},   {"uint", ScalarType::UInt32},     {"uint32", ScalarType::UInt32},
      {"float", ScalarType::Float32}, {"float32", ScalarType::Float32}, {"double", ScalarType::Float64},
      {"float64", ScalarType::Float64}};
  auto it = kTypes.find(s);
  if (it == kTypes.end()) throw FormatError("unsupported PLY property type '" + s + "'");
  return it->second;
}

template <typename T>
T read_as(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

inline double read_scalar(const unsigned char* p, ScalarType t) {
  switch (t) {
    case ScalarType::Int8: return read_as<std::int8_t>(p);
    case ScalarType::UInt8: return read_as<std::uint8_t>(p);
    case ScalarType::Int16: return read_as<std::int16_t>(p);
    case ScalarType::UInt16: return read_as<std::uint16_t>(p);
    case ScalarType::Int32: return read_as<std::int32_t>(p);
    case ScalarType::UInt32: return read_as<std::uint32_t>(p);
    case ScalarType::Float32: return read_as<float>(p);
    case ScalarType::Float64: return read_as<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type;
  std::size_t offset;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
  std::size_t stride = 0;
  bool has_list = false;
};

inline std::string f_rest_name(int i) { return "f_rest_" + std::to_string(i); }

}  // namespace ply_detail

inline GaussianScene load_gaussian_ply(const std::filesystem::path& path) {
  using namespace ply_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");

  std::string line;
  std::getline(in, line);
  if (line != "ply" && line != "ply\r") throw FormatError("'" + path.string() + "' is not a PLY file");

  std::vector<Element> elements;
  bool binary_le = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (kw == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(std::move(e));
    } else if (kw == "property") {
      if (elements.empty()) throw FormatError("PLY property before any element");
      std::string type, name;
      ls >> type;
      auto& e = elements.back();
      if (type == "list") {
        e.has_list = true;
        continue;
      }
      ls >> name;
      const ScalarType t = parse_type(type);
      e.properties.push_back({name, t, e.stride});
      e.stride += type_size(t);
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!binary_le) throw FormatError("'" + path.string() + "': only binary_little_endian PLY is supported");

  // Skip fixed-size elements that precede the vertex element.
  const Element* vertex = nullptr;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      vertex = &e;
      break;
    }
    if (e.has_list) throw FormatError("'" + path.string() + "': list element '" + e.name + "' precedes vertex data");
    in.seekg(std::streamoff(e.count * e.stride), std::ios::cur);
  }
  if (!vertex) throw FormatError("'" + path.string() + "': no vertex element");
  if (vertex->has_list) throw FormatError("'" + path.string() + "': list properties in vertex element");

  std::unordered_map<std::string, const Property*> by_name;
  for (const auto& p : vertex->properties) by_name[p.name] = &p;
  auto require = [&](const std::string& name) -> const Property* {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("'" + path.string() + "': missing required property '" + name + "'");
    return it->second;
  };
  auto optional = [&](const std::string& name) -> const Property* {
    auto it = by_name.find(name);
    return it == by_name.end() ? nullptr : it->second;
  };

  const Property* pos[3] = {require("x"), require("y"), require("z")};
  const Property* dc[3] = {require("f_dc_0"), require("f_dc_1"), require("f_dc_2")};
  const Property* opacity = require("opacity");
  const Property* scale[3] = {require("scale_0"), require("scale_1"), require("scale_2")};
  const Property* rot[4] = {require("rot_0"), require("rot_1"), require("rot_2"), require("rot_3")};
  const Property* rest[45];
  for (int i = 0; i < 45; ++i) rest[i] = optional(f_rest_name(i));
  const Property* id = optional("object_id");

  GaussianScene scene;
  scene.gaussians.resize(vertex->count);
  std::vector<unsigned char> buf(vertex->count * vertex->stride);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  if (std::size_t(in.gcount()) != buf.size())
    throw FormatError("'" + path.string() + "': truncated vertex data");

  for (std::size_t v = 0; v < vertex->count; ++v) {
    const unsigned char* row = buf.data() + v * vertex->stride;
    auto get = [&](const Property* p) {
      const double x = read_scalar(row + p->offset, p->type);
      if (!std::isfinite(x))
        throw DataError("'" + path.string() + "': non-finite '" + p->name + "' at vertex " + std::to_string(v));
      return x;
    };
    auto& g = scene.gaussians[v];
    for (int k = 0; k < 3; ++k) {
      g.position[k] = float(get(pos[k]));
      g.log_scale[k] = float(get(scale[k]));
      g.sh[std::size_t(k)] = float(get(dc[k]));
    }
    for (int c = 0; c < 3; ++c)
      for (int k = 1; k < kShCoeffsPerChannel; ++k) {
        const Property* p = rest[c * (kShCoeffsPerChannel - 1) + (k - 1)];
        g.sh[std::size_t(3 * k + c)] = p ? float(get(p)) : 0.0f;
      }
    g.opacity_logit = float(get(opacity));
    for (int k = 0; k < 4; ++k) g.rotation[k] = float(get(rot[k]));

    // Re-normalize only when off the unit sphere so a saved scene reloads bit-exact.
    const float n = g.rotation.norm();
    if (!(n > 0.0f)) throw DataError("'" + path.string() + "': zero quaternion at vertex " + std::to_string(v));
    if (std::abs(double(n) - 1.0) > 1e-6) g.rotation /= n;
    if (id) {
      const double raw = get(id);
      if (raw < 0) throw DataError("'" + path.string() + "': negative object_id at vertex " + std::to_string(v));
      g.object_id = ObjectId(raw);
    }
  }
  return scene;
}

inline void save_gaussian_ply(const GaussianScene& scene, const std::filesystem::path& path) {
  using namespace ply_detail;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");

  const bool with_ids = scene.has_ids();
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << scene.size() << "\n";
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"})
    out << "property float " << n << "\n";
  for (int i = 0; i < 45; ++i) out << "property float " << f_rest_name(i) << "\n";
  out << "property float opacity\n";
  for (const char* n : {"scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"})
    out << "property float " << n << "\n";
  if (with_ids) out << "property uint object_id\n";
  out << "end_header\n";

  std::vector<float> row;
  row.reserve(62);
  for (const auto& g : scene.gaussians) {
    row.clear();
    for (int k = 0; k < 3; ++k) row.push_back(g.position[k]);
    row.insert(row.end(), {0.0f, 0.0f, 0.0f});
    for (int k = 0; k < 3; ++k) row.push_back(g.sh[std::size_t(k)]);
    for (int c = 0; c < 3; ++c)
      for (int k = 1; k < kShCoeffsPerChannel; ++k) row.push_back(g.sh[std::size_t(3 * k + c)]);
    row.push_back(g.opacity_logit);
    for (int k = 0; k < 3; ++k) row.push_back(g.log_scale[k]);
    for (int k = 0; k < 4; ++k) row.push_back(g.rotation[k]);
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
    if (with_ids) {
      const std::uint32_t id = g.id_or_background();
      out.write(reinterpret_cast<const char*>(&id), sizeof(id));
    }
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace splatsim
