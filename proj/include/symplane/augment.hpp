#pragma once

#include "symplane/plane.hpp"
#include "symplane/volume.hpp"

#include <array>
#include <string>
#include <vector>

namespace symplane {

/// Pinhole cone-beam camera. Pose maps world to camera coordinates
/// (p_cam = R p_world + t); the X-ray source sits at the camera origin and
/// the detector plane lies at z = sdd_mm.
struct CameraModel {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d t = Eigen::Vector3d::Zero();      // mm
  double sdd_mm = 1000.0;                           // source-to-detector distance
  double pixel_spacing_mm = 1.0;
  Eigen::Vector2d principal_point_px{0.0, 0.0};
  Eigen::Vector2i dims_px{0, 0};

  /// Throws unless R is orthonormal and distances/spacings are positive.
  void validate() const;

  Eigen::Vector3d source_world() const { return -R.transpose() * t; }
  /// Unit world-space direction of the ray through pixel center (u, v).
  Eigen::Vector3d ray_direction(double u, double v) const;
};

void save_camera_json(const CameraModel& cam, const std::string& path);
CameraModel load_camera_json(const std::string& path);

/// Grayscale float image, row-major, origin at the top-left pixel.
struct Image2D {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  float at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
  float& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  static Image2D zeros(int w, int h);
};

/// RGB float image, interleaved row-major.
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // 3 * width * height

  float* at(int u, int v) { return &pixels[3 * (static_cast<std::size_t>(v) * width + u)]; }
  const float* at(int u, int v) const {
    return &pixels[3 * (static_cast<std::size_t>(v) * width + u)];
  }
  static ImageRGB zeros(int w, int h);
};

/// 16-bit binary PGM, values scaled by the image maximum.
void save_pgm(const Image2D& img, const std::string& path);
Image2D load_pgm(const std::string& path);
/// 8-bit binary PPM; pixel values are clamped to [0, 1] before quantization.
void save_ppm(const ImageRGB& img, const std::string& path);

/// Replaces the injured half-space (sign of the signed distance opposite to
/// healthy_side) with trilinear samples of the reflected healthy side.
/// Throws if the plane misses the volume's bounding box.
Volume mirror_template(const Volume& v, const SymmetryPlane& plane, int healthy_side);

/// Attenuation coefficient per mm from an HU-like intensity.
double attenuation_from_hu(double hu);

/// Digitally reconstructed radiograph: per-pixel line integral of the
/// attenuation along the source-pixel ray, fixed step <= min(spacing)/2.
Image2D drr(const Volume& v, const CameraModel& cam);

/// Binary contour image: ray integrals of the gradient magnitude, thresholded
/// at the 90th percentile of the nonzero response, then thinned.
Image2D edge_contours(const Volume& v, const CameraModel& cam);

/// Normalized cross-correlation over the common support (pixels where either
/// image is nonzero); returns -1 when the support is degenerate or flat.
double ncc(const Image2D& a, const Image2D& b);

struct RegisterResult {
  CameraModel camera;
  double score = -1.0;       // NCC at the returned pose
  double init_score = -1.0;  // NCC at the initial pose
};

/// Derivative-free NCC maximization over a 6-DOF pose perturbation of the
/// initial camera: rotations about the volume center (bounded by rot_bound,
/// radians) plus a camera-frame translation (bounded by trans_bound, mm).
/// Note that a source-centered rotation of the initial pose decomposes into a
/// center rotation plus a translation of roughly angle x source distance, so
/// trans_bound must cover that lever arm.
RegisterResult register_2d3d(const Image2D& xray, const Volume& v, const CameraModel& init,
                             double rot_bound, double trans_bound, int max_iter = 100);

/// Grayscale X-ray in luminance with contour pixels painted in `color`.
ImageRGB overlay(const Image2D& xray, const Image2D& contours,
                 const std::array<float, 3>& color = {0.0f, 1.0f, 0.0f});

}  // namespace symplane
