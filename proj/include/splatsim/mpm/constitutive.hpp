#pragma once

#include "splatsim/core.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace splatsim::mpm {

enum class ConstitutiveModel { FixedCorotated };

inline ConstitutiveModel parse_model(const std::string& s) {
  if (s == "fixed_corotated" || s == "fixed-corotated" || s == "corotated") return ConstitutiveModel::FixedCorotated;
  throw ConfigError("unknown constitutive model '" + s + "'");
}

inline std::string model_name(ConstitutiveModel) { return "fixed_corotated"; }

struct Material {
  double density = 1000.0;
  double youngs_modulus = 1e7;
  double poisson_ratio = 0.2;
  ConstitutiveModel model = ConstitutiveModel::FixedCorotated;
  Vec3 initial_velocity = Vec3::Zero();

  [[nodiscard]] double mu() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
  [[nodiscard]] double lambda() const {
    return youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
  }
  /// √(E/ρ), the speed used in the CFL guidance.
  [[nodiscard]] double wave_speed() const { return std::sqrt(youngs_modulus / density); }

  void validate() const {
    if (!(density > 0)) throw ConfigError("material density must be positive");
    if (!(youngs_modulus > 0)) throw ConfigError("Young's modulus must be positive");
    if (!(poisson_ratio > 0 && poisson_ratio < 0.5)) throw ConfigError("Poisson ratio must lie in (0, 0.5)");
    if (!initial_velocity.allFinite()) throw ConfigError("initial velocity must be finite");
  }
};

inline constexpr double kMinSingularValue = 0.05;

/// Rotation-preserving SVD: F = U·diag(sigma)·Vᵀ with det U = det V = +1.
/// For inverted F the smallest singular value comes out negative.
struct SignedSvd {
  Mat3 U, V;
  Vec3 sigma;
};

inline SignedSvd signed_svd(const Mat3& F) {
  Eigen::JacobiSVD<Mat3> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SignedSvd out{svd.matrixU(), svd.matrixV(), svd.singularValues()};
  if (out.U.determinant() < 0) {
    out.U.col(2) *= -1.0;
    out.sigma[2] *= -1.0;
  }
  if (out.V.determinant() < 0) {
    out.V.col(2) *= -1.0;
    out.sigma[2] *= -1.0;
  }
  return out;
}

/// Rotation factor of the polar decomposition F = R·S.
inline Mat3 polar_rotation(const Mat3& F) {
  const auto s = signed_svd(F);
  return s.U * s.V.transpose();
}

/// Projects F so every signed singular value is at least kMinSingularValue.
inline Mat3 project_inverted(const Mat3& F) {
  auto s = signed_svd(F);
  s.sigma = s.sigma.cwiseMax(kMinSingularValue);
  return s.U * s.sigma.asDiagonal() * s.V.transpose();
}

/// Ψ(F) = μ·Σ(σᵢ − 1)² + ½λ(J − 1)².
inline double fixed_corotated_energy(const Mat3& F, double mu, double lambda) {
  const auto s = signed_svd(F);
  const double J = F.determinant();
  return mu * (s.sigma.array() - 1.0).square().sum() + 0.5 * lambda * (J - 1.0) * (J - 1.0);
}

/// First Piola-Kirchhoff stress P = ∂Ψ/∂F = 2μ(F − R) + λ(J − 1)·J·F⁻ᵀ.
/// Inverted or near-degenerate F is first projected to singular values ≥ 0.05.
inline Mat3 piola_kirchhoff(const Mat3& F_in, const Material& m) {
  Mat3 F = F_in;
  auto s = signed_svd(F);
  if (s.sigma.minCoeff() < kMinSingularValue) {
    s.sigma = s.sigma.cwiseMax(kMinSingularValue);
    F = s.U * s.sigma.asDiagonal() * s.V.transpose();
  }
  const Mat3 R = s.U * s.V.transpose();
  const double J = s.sigma.prod();
  // J·F⁻ᵀ is the cofactor matrix of F.
  Mat3 cof;
  cof.col(0) = F.col(1).cross(F.col(2));
  cof.col(1) = F.col(2).cross(F.col(0));
  cof.col(2) = F.col(0).cross(F.col(1));
  return 2.0 * m.mu() * (F - R) + m.lambda() * (J - 1.0) * cof;
}

}  // namespace splatsim::mpm
