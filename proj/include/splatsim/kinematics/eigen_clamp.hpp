#pragma once

// Mapping simulated deformation back onto Gaussian shapes.
//
// Per Gaussian: Σ′ = F·Σ·Fᵀ is split into eigenvectors Q and axis lengths
// S′ = √Λ, with the eigenpairs permuted and sign-fixed to follow the rest
// rotation R. S′ is clamped into [τ_min, τ_max], and the pose handed to the
// renderer is the partial correction
//   Rᵗ = R + λ_R·(Q − R),   Sᵗ = S + λ_S·(S^τ − S),   A = Rᵗ·diag(Sᵗ).
// Rᵗ is in general not a rotation (λ_R ≠ 1); A·Aᵀ is still a valid covariance.

#include "splatsim/core.hpp"
#include "splatsim/io/gaussian_scene.hpp"
#include "splatsim/mpm/checkpoint.hpp"
#include "splatsim/mpm/constitutive.hpp"
#include "splatsim/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <map>
#include <span>
#include <vector>

namespace splatsim::kinematics {

struct ClampParams {
  double tau_min = 0.0;
  double tau_max = 0.0;
  double lambda_R = 1.2;
  double lambda_S = 0.8;

  void validate() const {
    if (!(tau_min > 0 && tau_min < tau_max)) throw ConfigError("clamp bounds must satisfy 0 < tau_min < tau_max");
    if (!(lambda_R >= 0 && lambda_S >= 0)) throw ConfigError("lambda_R and lambda_S must be non-negative");
  }
};

/// How deformed Gaussians are posed for rendering.
enum class CovarianceMode {
  EigenClamp,       // matched decomposition, clamp and λ-blend
  RawDeformation,   // A = F·R·diag(S), i.e. Σ′ = F·Σ·Fᵀ unmodified
  FixedCovariance,  // positions only
};

inline constexpr double kScaleFloor = 1e-6;
inline constexpr double kDegenerateRelTol = 1e-10;

/// Σ′ = F·R·diag(S)²·Rᵀ·Fᵀ, symmetrized.
inline Mat3 deformed_covariance(const Mat3& R, const Vec3& S, const Mat3& F) {
  if (!F.allFinite()) throw DataError("deformed_covariance: non-finite deformation gradient");
  const Mat3 A = F * R * S.asDiagonal();
  const Mat3 sigma = A * A.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

struct MatchedEigen {
  Mat3 Q;    // column i pairs with column i of the rest rotation
  Vec3 axes; // √eigenvalue per column of Q
};

namespace detail {

// Completes an orthonormal frame from the fixed column `keep` of Q by
// projecting the remaining rest axes onto the plane orthogonal to it.
inline Mat3 complete_from_rest(const Mat3& R_rest, int keep, const Vec3& axis) {
  Mat3 Q;
  Q.col(keep) = axis;
  const int a = (keep + 1) % 3, b = (keep + 2) % 3;
  Vec3 qa = R_rest.col(a) - R_rest.col(a).dot(axis) * axis;
  if (qa.norm() < 1e-12) qa = axis.unitOrthogonal();
  qa.normalize();
  Q.col(a) = qa;
  Q.col(b) = axis.cross(qa);  // right-handed: col(b) = col(keep) × col(a)
  return Q;
}

}  // namespace detail

/// Eigendecomposition of Σ′ aligned with R_rest: greedy maximal |dot| pairing,
/// positive dot per column, last column negated if det Q < 0. Fully
/// repeated eigenvalues return R_rest; a repeated pair keeps the distinct
/// axis and fills the plane from the projected rest axes.
inline MatchedEigen eigen_decompose_matched(const Mat3& sigma, const Mat3& R_rest) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (sigma + sigma.transpose()));
  const Vec3 lam = es.eigenvalues();  // ascending
  const Mat3 E = es.eigenvectors();
  const double scale = std::max({std::abs(lam[0]), std::abs(lam[2]), std::numeric_limits<double>::min()});
  const bool low_pair = lam[1] - lam[0] <= kDegenerateRelTol * scale;
  const bool high_pair = lam[2] - lam[1] <= kDegenerateRelTol * scale;
  auto root = [](double l) { return std::sqrt(std::max(l, 0.0)); };

  MatchedEigen out;
  if (low_pair && high_pair) {
    out.Q = R_rest;
    out.axes.setConstant(root(lam.mean()));
    return out;
  }
  if (low_pair || high_pair) {
    const int distinct = low_pair ? 2 : 0;
    const double pair_value = low_pair ? 0.5 * (lam[0] + lam[1]) : 0.5 * (lam[1] + lam[2]);
    Vec3 e = E.col(distinct);
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(R_rest.col(i).dot(e)) > std::abs(R_rest.col(best).dot(e))) best = i;
    if (R_rest.col(best).dot(e) < 0) e = -e;
    out.Q = detail::complete_from_rest(R_rest, best, e);
    for (int i = 0; i < 3; ++i) out.axes[i] = root(i == best ? lam[distinct] : pair_value);
    return out;
  }

  Mat3 dots = (R_rest.transpose() * E).cwiseAbs();  // (rest column i, eigenvector j)
  std::array<bool, 3> row_used{}, col_used{};
  for (int round = 0; round < 3; ++round) {
    int bi = -1, bj = -1;
    double best = -1.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (!row_used[std::size_t(i)] && !col_used[std::size_t(j)] && dots(i, j) > best) {
          best = dots(i, j);
          bi = i;
          bj = j;
        }
    row_used[std::size_t(bi)] = col_used[std::size_t(bj)] = true;
    Vec3 q = E.col(bj);
    if (R_rest.col(bi).dot(q) < 0) q = -q;
    out.Q.col(bi) = q;
    out.axes[bi] = root(lam[bj]);
  }
  if (out.Q.determinant() < 0) out.Q.col(2) *= -1.0;
  return out;
}

inline Vec3 adaptive_eigen_clamp(const Vec3& axes, double tau_min, double tau_max) {
  return axes.cwiseMax(tau_min).cwiseMin(tau_max);
}

struct BlendedPose {
  Mat3 R;
  Vec3 S;
};

/// Rᵗ = R + λ_R(Q − R), Sᵗ = S + λ_S(S^τ − S), evaluated as convex-style
/// combinations so that λ = 1 reproduces (Q, S^τ) exactly. Sᵗ ≥ 1e-6.
inline BlendedPose blend_correction(const Mat3& R_rest, const Vec3& S_rest, const Mat3& Q, const Vec3& S_tau,
                                    double lambda_R, double lambda_S) {
  BlendedPose out;
  out.R = (1.0 - lambda_R) * R_rest + lambda_R * Q;
  out.S = ((1.0 - lambda_S) * S_rest + lambda_S * S_tau).cwiseMax(kScaleFloor);
  return out;
}

inline Mat3 compose_render_transform(const Mat3& R_t, const Vec3& S_t) { return R_t * S_t.asDiagonal(); }

/// Full per-Gaussian chain from the rest pose and F to the render factor A.
inline Mat3 corrected_transform(const Mat3& R_rest, const Vec3& S_rest, const Mat3& F, const ClampParams& p,
                                bool reproject_rotation = false) {
  const Mat3 sigma = deformed_covariance(R_rest, S_rest, F);
  const auto m = eigen_decompose_matched(sigma, R_rest);
  const Vec3 s_tau = adaptive_eigen_clamp(m.axes, p.tau_min, p.tau_max);
  auto pose = blend_correction(R_rest, S_rest, m.Q, s_tau, p.lambda_R, p.lambda_S);
  if (reproject_rotation) pose.R = mpm::polar_rotation(pose.R);
  return compose_render_transform(pose.R, pose.S);
}

/// τ_min = 0.3·median, τ_max = 3·median of all rest axis scales in `subset`.
inline ClampParams default_clamp_params(const GaussianScene& subset, double lambda_R = 1.2, double lambda_S = 0.8) {
  std::vector<double> s;
  s.reserve(subset.size() * 3);
  for (const auto& g : subset.gaussians) {
    const Vec3 sc = g.scale();
    s.insert(s.end(), {sc.x(), sc.y(), sc.z()});
  }
  ClampParams p;
  p.lambda_R = lambda_R;
  p.lambda_S = lambda_S;
  if (s.empty()) {
    p.tau_min = 1e-6;
    p.tau_max = 1.0;
    return p;
  }
  auto mid = s.begin() + std::ptrdiff_t(s.size() / 2);
  std::nth_element(s.begin(), mid, s.end());
  double median = *mid;
  if (s.size() % 2 == 0) median = 0.5 * (median + *std::max_element(s.begin(), mid));
  p.tau_min = 0.3 * median;
  p.tau_max = 3.0 * median;
  return p;
}

/// Scene plus one render factor A per Gaussian (Σ = A·Aᵀ).
struct PosedScene {
  GaussianScene scene;
  std::vector<Mat3> transforms;
};

inline PosedScene rest_pose(const GaussianScene& scene) {
  PosedScene out{scene, {}};
  out.transforms.resize(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) out.transforms[i] = scene.gaussians[i].linear_transform();
  return out;
}

struct PoseOptions {
  CovarianceMode mode = CovarianceMode::EigenClamp;
  bool reproject_rotation = false;
};

/// Moves simulated Gaussians to their particles and poses their covariance;
/// Gaussians without a record keep their rest pose. `params` is keyed by object id.
inline PosedScene update_gaussians(const GaussianScene& scene, const mpm::Frame& frame,
                                   const std::map<ObjectId, ClampParams>& params, const PoseOptions& opt = {}) {
  PosedScene out = rest_pose(scene);
  std::vector<unsigned char> seen(scene.size(), 0);
  for (const auto& r : frame.records) {
    if (r.gaussian_index < 0 || std::size_t(r.gaussian_index) >= scene.size())
      throw DataError("frame record references Gaussian " + std::to_string(r.gaussian_index) + " of " +
                      std::to_string(scene.size()));
    if (seen[std::size_t(r.gaussian_index)]++)
      throw DataError("frame lists Gaussian " + std::to_string(r.gaussian_index) + " twice");
    if (opt.mode == CovarianceMode::EigenClamp && !params.count(scene.gaussians[std::size_t(r.gaussian_index)].id_or_background()))
      throw ConfigError("no clamp parameters for object id " +
                        std::to_string(scene.gaussians[std::size_t(r.gaussian_index)].id_or_background()));
  }

  parallel_for(std::int64_t(frame.records.size()), [&](std::int64_t k) {
    const auto& r = frame.records[std::size_t(k)];
    const auto gi = std::size_t(r.gaussian_index);
    auto& g = out.scene.gaussians[gi];
    g.position = r.x.cast<float>();
    const Mat3 R = g.rotation_matrix();
    const Vec3 S = g.scale();
    switch (opt.mode) {
      case CovarianceMode::EigenClamp:
        out.transforms[gi] = corrected_transform(R, S, r.F, params.at(g.id_or_background()), opt.reproject_rotation);
        break;
      case CovarianceMode::RawDeformation: out.transforms[gi] = r.F * R * S.asDiagonal(); break;
      case CovarianceMode::FixedCovariance: break;
    }
  });
  return out;
}

/// sqrt(λmax/λmin) of A·Aᵀ: the splat's longest-to-shortest axis ratio.
inline double axis_ratio(const Mat3& A) {
  Eigen::JacobiSVD<Mat3> svd(A);
  const Vec3 s = svd.singularValues();
  return s[2] > 0 ? s[0] / s[2] : std::numeric_limits<double>::infinity();
}

}  // namespace splatsim::kinematics
