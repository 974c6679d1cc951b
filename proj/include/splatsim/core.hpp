#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace splatsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

/// Object identifier carried by Gaussians and masks. 0 is background.
using ObjectId = std::uint32_t;
inline constexpr ObjectId kBackgroundId = 0;

// Error hierarchy. The CLI maps these to exit codes.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or incomplete input file.
struct FormatError : Error {
  using Error::Error;
};

/// Well-formed input whose values are invalid (NaN, non-orthonormal, ...).
struct DataError : Error {
  using Error::Error;
};

/// Inconsistent or missing configuration.
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// Numerical failure during simulation (NaN state, particle escaped).
struct SimulationError : Error {
  SimulationError(const std::string& what, std::int64_t step_, std::int64_t particle_)
      : Error(what), step(step_), particle(particle_) {}
  std::int64_t step;
  std::int64_t particle;
};

}  // namespace splatsim
