#pragma once

#include "symplane/plane.hpp"

#include <cmath>
#include <stdexcept>

namespace symplane {

/// Angle between plane normals in degrees, folding the sign ambiguity:
/// theta_e = arccos(|n_est . n_gt|). Inputs must be unit vectors.
inline double rotation_error_deg(const Eigen::Vector3d& est_normal,
                                 const Eigen::Vector3d& gt_normal) {
  if (std::abs(est_normal.norm() - 1.0) > 1e-6 || std::abs(gt_normal.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("rotation_error_deg: normals must be unit vectors");
  const double c = std::clamp(std::abs(est_normal.dot(gt_normal)), 0.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

/// Offset between planes along the ground-truth normal in mm:
/// t_e = |(n0_gt - n0_est) . n_gt|. In-plane shifts are invisible.
inline double translation_error_mm(const SymmetryPlane& est, const SymmetryPlane& gt) {
  return std::abs((gt.point - est.point).dot(gt.normal));
}

}  // namespace symplane
