#pragma once

// Pinhole cameras. Convention: x right, y down, z forward; pixel (i, j) is
// (column, row) with pixel centers at integer coordinates.
//
// Camera-set file (JSON):
//   { "cameras": [ { "name": "view_000", "fx": .., "fy": .., "cx": .., "cy": ..,
//                    "width": W, "height": H,
//                    "world_to_camera": [[r00,r01,r02,tx],[..],[..],[0,0,0,1]],
//                    "mask": "view_000.png" }, ... ] }
// "world_to_camera" may also be a flat row-major array of 16 numbers.

#include "splatsim/core.hpp"
#include "splatsim/io/raster.hpp"
#include "splatsim/io/png.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace splatsim {

struct Camera {
  std::string name;
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 1, height = 1;
  Mat4 world_to_camera = Mat4::Identity();
  std::string mask_file;

  [[nodiscard]] Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  [[nodiscard]] Vec3 translation() const { return world_to_camera.topRightCorner<3, 1>(); }
  /// C = −Rᵀt.
  [[nodiscard]] Vec3 center() const { return -rotation().transpose() * translation(); }
  [[nodiscard]] Vec3 to_camera(const Vec3& world) const { return rotation() * world + translation(); }
  [[nodiscard]] Vec2 project(const Vec3& cam) const { return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy}; }
  [[nodiscard]] double diagonal() const { return std::hypot(double(width), double(height)); }

  /// Camera at `eye` looking at `target`; `up` is the world direction that maps to −y on screen.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double f, int w, int h,
                        std::string name = {});
};

inline Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double f, int w, int h,
                              std::string name) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  const Vec3 y = z.cross(x);
  Camera cam;
  cam.name = std::move(name);
  cam.fx = cam.fy = f;
  cam.cx = 0.5 * (w - 1);
  cam.cy = 0.5 * (h - 1);
  cam.width = w;
  cam.height = h;
  Mat3 R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = z.transpose();
  cam.world_to_camera.setIdentity();
  cam.world_to_camera.topLeftCorner<3, 3>() = R;
  cam.world_to_camera.topRightCorner<3, 1>() = -R * eye;
  return cam;
}

inline void validate_camera(const Camera& cam, double tol = 1e-4) {
  const std::string where = "camera '" + cam.name + "'";
  if (cam.width <= 0 || cam.height <= 0) throw DataError(where + ": non-positive image size");
  if (!(cam.fx > 0) || !(cam.fy > 0)) throw DataError(where + ": non-positive focal length");
  if (!cam.world_to_camera.allFinite()) throw DataError(where + ": non-finite extrinsics");
  const Mat3 R = cam.rotation();
  if ((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > tol || std::abs(R.determinant() - 1.0) > tol)
    throw DataError(where + ": world_to_camera rotation is not orthonormal");
  if ((cam.world_to_camera.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > tol)
    throw DataError(where + ": world_to_camera last row must be (0,0,0,1)");
}

inline nlohmann::json camera_to_json(const Camera& cam) {
  nlohmann::json m = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) m.push_back({cam.world_to_camera(r, 0), cam.world_to_camera(r, 1),
                                           cam.world_to_camera(r, 2), cam.world_to_camera(r, 3)});
  return {{"name", cam.name}, {"fx", cam.fx},         {"fy", cam.fy},     {"cx", cam.cx},
          {"cy", cam.cy},     {"width", cam.width},   {"height", cam.height},
          {"world_to_camera", m}, {"mask", cam.mask_file}};
}

inline Camera camera_from_json(const nlohmann::json& j, std::size_t index) {
  Camera cam;
  try {
    cam.name = j.value("name", "view_" + std::to_string(index));
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.mask_file = j.value("mask", cam.name + ".png");
    const auto& m = j.at("world_to_camera");
    if (m.size() == 16) {
      for (int k = 0; k < 16; ++k) cam.world_to_camera(k / 4, k % 4) = m.at(std::size_t(k)).get<double>();
    } else if (m.size() == 4) {
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) cam.world_to_camera(r, c) = m.at(std::size_t(r)).at(std::size_t(c)).get<double>();
    } else {
      throw FormatError("world_to_camera must be 4x4 or 16 numbers");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("camera record " + std::to_string(index) + ": " + e.what());
  }
  return cam;
}

inline std::vector<Camera> parse_cameras(const nlohmann::json& doc) {
  if (!doc.contains("cameras") || !doc["cameras"].is_array()) throw FormatError("camera set: missing 'cameras' array");
  std::vector<Camera> cams;
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc["cameras"].size(); ++i) {
    Camera cam = camera_from_json(doc["cameras"][i], i);
    validate_camera(cam);
    if (!names.insert(cam.name).second) throw DataError("camera set: duplicate view name '" + cam.name + "'");
    cams.push_back(std::move(cam));
  }
  return cams;
}

inline std::vector<Camera> load_cameras(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open camera set '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("camera set '" + path.string() + "': " + e.what());
  }
  return parse_cameras(doc);
}

inline void save_cameras(const std::vector<Camera>& cams, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["cameras"] = nlohmann::json::array();
  for (const auto& c : cams) doc["cameras"].push_back(camera_to_json(c));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

/// Loads one id mask per camera from `dir`, in camera order.
inline std::vector<IdMask> load_id_masks(const std::filesystem::path& dir, const std::vector<Camera>& cams) {
  std::vector<std::string> missing;
  for (const auto& c : cams)
    if (!std::filesystem::exists(dir / c.mask_file)) missing.push_back(c.name);
  if (!missing.empty()) {
    std::string msg = "missing id mask for view(s):";
    for (const auto& n : missing) msg += " " + n;
    throw IoError(msg + " in '" + dir.string() + "'");
  }
  std::vector<IdMask> masks(cams.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    masks[i] = png::read_gray(dir / cams[i].mask_file);
    if (masks[i].width != cams[i].width || masks[i].height != cams[i].height)
      throw DataError("mask for view '" + cams[i].name + "' is " + std::to_string(masks[i].width) + "x" +
                      std::to_string(masks[i].height) + ", camera expects " + std::to_string(cams[i].width) + "x" +
                      std::to_string(cams[i].height));
  }
  return masks;
}

}  // namespace splatsim
