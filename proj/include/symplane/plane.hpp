#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace symplane {

/// Plane of bilateral symmetry: a point on the plane plus a unit normal.
struct SymmetryPlane {
  Eigen::Vector3d point{0.0, 0.0, 0.0};   // n0, mm
  Eigen::Vector3d normal{1.0, 0.0, 0.0};  // unit

  /// Signed distance of p to the plane along the normal.
  double signed_distance(const Eigen::Vector3d& p) const { return normal.dot(p - point); }

  /// Deterministic representative: normal.x >= 0, tie-break normal.y >= 0,
  /// then normal.z >= 0.
  SymmetryPlane canonicalized() const;

  /// Rigid frame g whose first column is the plane normal and whose origin is
  /// the plane point; maps the world Y-Z plane onto this plane.
  Eigen::Isometry3d frame() const;
};

/// Involutive reflection across a symmetry plane: I - 2 n n^T with
/// translation 2 (n . n0) n. Linear-part determinant is -1.
struct ReflectionMap {
  SymmetryPlane plane;
  Eigen::Matrix4d matrix = Eigen::Matrix4d::Identity();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return matrix.topLeftCorner<3, 3>() * p + matrix.topRightCorner<3, 1>();
  }
};

ReflectionMap reflection_from_plane(const SymmetryPlane& plane);

/// Minimal 3-DOF plane parameterization: two normal angles plus signed offset.
/// normal = (cos(beta) cos(alpha), cos(beta) sin(alpha), sin(beta)),
/// plane point = d * normal; alpha, beta in [-pi/2, pi/2].
struct PlaneParams {
  double alpha = 0.0;  // azimuth, radians
  double beta = 0.0;   // elevation, radians
  double d = 0.0;      // offset along normal, mm

  SymmetryPlane to_plane() const;
  static PlaneParams from_plane(const SymmetryPlane& p);

  Eigen::Vector3d as_vector() const { return {alpha, beta, d}; }
};

}  // namespace symplane
