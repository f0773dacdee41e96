#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace symplane {

/// HU value returned when sampling outside the grid (air-equivalent).
constexpr double kOutsideValue = -1000.0;

/// Regular 3D scalar grid with physical spacing and origin.
/// Voxels are stored x-fastest; values are HU-like 32-bit floats.
struct Volume {
  Eigen::Vector3i dims{0, 0, 0};
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};  // mm per voxel, strictly positive
  Eigen::Vector3d origin{0.0, 0.0, 0.0};   // world position of voxel (0,0,0) center, mm
  std::vector<float> voxels;

  std::size_t size() const { return voxels.size(); }

  std::size_t linear(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims.x()) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims.y()) * k);
  }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims.x() && j < dims.y() && k < dims.z();
  }

  float at(int i, int j, int k) const { return voxels[linear(i, j, k)]; }
  float& at(int i, int j, int k) { return voxels[linear(i, j, k)]; }

  float max_value() const;

  /// Throws if dims/spacing/voxel-count are inconsistent or values non-finite.
  void validate() const;
};

/// Boolean mask sharing the grid metadata of its parent volume.
struct BinaryMask {
  Eigen::Vector3i dims{0, 0, 0};
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};
  Eigen::Vector3d origin{0.0, 0.0, 0.0};
  std::vector<std::uint8_t> bits;

  std::size_t linear(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims.x()) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims.y()) * k);
  }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims.x() && j < dims.y() && k < dims.z();
  }

  bool get(int i, int j, int k) const { return bits[linear(i, j, k)] != 0; }
  void set(int i, int j, int k, bool v) { bits[linear(i, j, k)] = v ? 1 : 0; }

  std::size_t count() const;

  static BinaryMask like(const Volume& v);
  static BinaryMask like(const BinaryMask& m);
};

/// Intensity histogram over a fixed range; out-of-range values clamp to end bins.
struct Histogram {
  std::vector<double> bin_edges;        // size = bins + 1, monotone
  std::vector<std::uint64_t> counts;    // size = bins
  std::uint64_t total = 0;

  std::size_t bins() const { return counts.size(); }
  std::vector<double> normalized() const;  // sums to 1
};

Volume load_volume(const std::string& path);
void save_volume(const Volume& v, const std::string& path);

Eigen::Vector3d world_from_index(const Volume& v, const Eigen::Vector3i& idx);
Eigen::Vector3d world_from_index(const BinaryMask& m, const Eigen::Vector3i& idx);

/// Trilinear interpolation at world point p (mm); total function,
/// points outside the voxel-center bounding box read kOutsideValue.
double sample_trilinear(const Volume& v, const Eigen::Vector3d& p);

/// Bit set iff lo <= I(voxel) <= hi.
BinaryMask threshold_segment(const Volume& v, double lo, double hi);

Histogram histogram(const Volume& v, const BinaryMask& m, int bins, double lo, double hi);

/// Adds zero-mean Gaussian noise with sigma = fraction * max(I); deterministic per seed.
Volume add_gaussian_noise(const Volume& v, double fraction, std::uint64_t seed);

/// Morphological dilation by a cube of radius r voxels.
BinaryMask dilate(const BinaryMask& m, int r);

/// 3x3x3 median filter (edge-clamped); robust denoising for segmentation.
Volume median_filter3(const Volume& v);

/// Separable Gaussian smoothing with clamped boundaries; sigma in mm.
Volume gaussian_blur(const Volume& v, double sigma_mm);

/// Labels 26-connected components; returns per-voxel label (-1 for clear) and count.
std::pair<std::vector<int>, int> connected_components_3d(const BinaryMask& m);

}  // namespace symplane
