#include "symplane/plane.hpp"

#include <cmath>
#include <stdexcept>

namespace symplane {

SymmetryPlane SymmetryPlane::canonicalized() const {
  SymmetryPlane out = *this;
  const Eigen::Vector3d& n = out.normal;
  bool flip = false;
  if (n.x() < 0.0)
    flip = true;
  else if (n.x() == 0.0 && n.y() < 0.0)
    flip = true;
  else if (n.x() == 0.0 && n.y() == 0.0 && n.z() < 0.0)
    flip = true;
  if (flip) out.normal = -out.normal;
  return out;
}

Eigen::Isometry3d SymmetryPlane::frame() const {
  Eigen::Vector3d n = normal.normalized();
  Eigen::Vector3d seed = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  Eigen::Vector3d v = (seed - seed.dot(n) * n);
  if (v.norm() < 1e-12) v = Eigen::Vector3d::UnitZ().cross(n);
  v.normalize();
  Eigen::Vector3d w = n.cross(v);
  Eigen::Isometry3d g = Eigen::Isometry3d::Identity();
  g.linear().col(0) = n;
  g.linear().col(1) = v;
  g.linear().col(2) = w;
  g.translation() = point;
  return g;
}

ReflectionMap reflection_from_plane(const SymmetryPlane& plane) {
  const double norm = plane.normal.norm();
  if (std::abs(norm - 1.0) > 1e-9)
    throw std::invalid_argument("reflection_from_plane: normal must be unit length");
  const Eigen::Vector3d n = plane.normal;
  ReflectionMap m;
  m.plane = plane;
  m.matrix.setIdentity();
  m.matrix.topLeftCorner<3, 3>() = Eigen::Matrix3d::Identity() - 2.0 * n * n.transpose();
  m.matrix.topRightCorner<3, 1>() = 2.0 * n.dot(plane.point) * n;
  return m;
}

SymmetryPlane PlaneParams::to_plane() const {
  SymmetryPlane p;
  p.normal = Eigen::Vector3d(std::cos(beta) * std::cos(alpha), std::cos(beta) * std::sin(alpha),
                             std::sin(beta));
  p.point = d * p.normal;
  return p;
}

PlaneParams PlaneParams::from_plane(const SymmetryPlane& plane) {
  SymmetryPlane c = plane.canonicalized();
  Eigen::Vector3d n = c.normal.normalized();
  PlaneParams pp;
  pp.beta = std::asin(std::clamp(n.z(), -1.0, 1.0));
  pp.alpha = std::atan2(n.y(), n.x());
  pp.d = n.dot(c.point);
  return pp;
}

}  // namespace symplane
