#pragma once

#include "splatsim/core.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace splatsim {

inline constexpr int kShCoeffsPerChannel = 16;  // degree 3
inline constexpr int kShFloats = 3 * kShCoeffsPerChannel;

/// One splat as stored on disk: scale and opacity pre-activation.
///
/// Fields stay in single precision so that a load/save cycle reproduces the
/// file bit for bit. `sh` is coefficient-major: sh[3*k + c] is coefficient k
/// of channel c (k = 0 is the DC term).
struct GaussianPrimitive {
  Eigen::Vector3f position = Eigen::Vector3f::Zero();
  Eigen::Vector3f log_scale = Eigen::Vector3f::Zero();
  Eigen::Vector4f rotation{1.0f, 0.0f, 0.0f, 0.0f};  // (w, x, y, z)
  float opacity_logit = 0.0f;
  std::array<float, kShFloats> sh{};
  std::optional<ObjectId> object_id;

  [[nodiscard]] Vec3 mean() const { return position.cast<double>(); }
  [[nodiscard]] Vec3 scale() const { return log_scale.cast<double>().array().exp(); }
  [[nodiscard]] double opacity() const { return 1.0 / (1.0 + std::exp(-double(opacity_logit))); }
  [[nodiscard]] Mat3 rotation_matrix() const {
    const Quat q{double(rotation[0]), double(rotation[1]), double(rotation[2]), double(rotation[3])};
    return q.normalized().toRotationMatrix();
  }
  /// A = R·diag(s); the world covariance is A·Aᵀ.
  [[nodiscard]] Mat3 linear_transform() const { return rotation_matrix() * scale().asDiagonal(); }
  [[nodiscard]] ObjectId id_or_background() const { return object_id.value_or(kBackgroundId); }

  /// Sets the DC coefficient so that degree-0 evaluation yields `rgb`.
  void set_base_color(const Vec3& rgb);
};

inline constexpr double kShC0 = 0.28209479177387814;

inline void GaussianPrimitive::set_base_color(const Vec3& rgb) {
  for (int c = 0; c < 3; ++c) sh[std::size_t(c)] = float((rgb[c] - 0.5) / kShC0);
}

inline float logit(double p) { return float(std::log(p / (1.0 - p))); }

struct GaussianScene {
  std::vector<GaussianPrimitive> gaussians;

  [[nodiscard]] std::size_t size() const { return gaussians.size(); }
  [[nodiscard]] bool empty() const { return gaussians.empty(); }
  [[nodiscard]] bool has_ids() const {
    for (const auto& g : gaussians)
      if (g.object_id) return true;
    return false;
  }
};

}  // namespace splatsim
