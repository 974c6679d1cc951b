#pragma once

#include "splatsim/io/gaussian_scene.hpp"

#include <algorithm>

namespace splatsim {

namespace sh_detail {
inline constexpr double C1 = 0.4886025119029199;
inline constexpr double C2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                                 0.5462742152960396};
inline constexpr double C3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                                 -0.4570457994644658, 1.445305721320277,  -0.5900435899266435};
}  // namespace sh_detail

/// Degree-3 real spherical-harmonics color in direction `dir` (unit, from
/// camera toward the Gaussian), offset by 0.5 and clamped at 0.
inline Vec3 eval_sh_color(const GaussianPrimitive& g, const Vec3& dir) {
  using namespace sh_detail;
  auto coeff = [&](int k) {
    return Vec3(g.sh[std::size_t(3 * k)], g.sh[std::size_t(3 * k + 1)], g.sh[std::size_t(3 * k + 2)]);
  };
  Vec3 c = kShC0 * coeff(0);
  const double x = dir.x(), y = dir.y(), z = dir.z();
  c += -C1 * y * coeff(1) + C1 * z * coeff(2) - C1 * x * coeff(3);

  const double xx = x * x, yy = y * y, zz = z * z, xy = x * y, yz = y * z, xz = x * z;
  c += C2[0] * xy * coeff(4) + C2[1] * yz * coeff(5) + C2[2] * (2.0 * zz - xx - yy) * coeff(6) +
       C2[3] * xz * coeff(7) + C2[4] * (xx - yy) * coeff(8);

  c += C3[0] * y * (3.0 * xx - yy) * coeff(9) + C3[1] * xy * z * coeff(10) +
       C3[2] * y * (4.0 * zz - xx - yy) * coeff(11) + C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * coeff(12) +
       C3[4] * x * (4.0 * zz - xx - yy) * coeff(13) + C3[5] * z * (xx - yy) * coeff(14) +
       C3[6] * x * (xx - 3.0 * yy) * coeff(15);

  c.array() += 0.5;
  return c.cwiseMax(0.0);
}

}  // namespace splatsim
