#pragma once

#include "symplane/plane.hpp"
#include "symplane/volume.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <string>
#include <vector>

namespace symplane {

constexpr float kAirValue = -1000.0f;
constexpr float kSoftTissueValue = 40.0f;
constexpr float kBoneMinValue = 400.0f;
constexpr float kBoneMaxValue = 1200.0f;

/// Default bone segmentation window (HU).
constexpr double kBoneWindowLo = 200.0;
constexpr double kBoneWindowHi = 3000.0;

/// Where the synthetic fracture fragment is planted.
enum class FractureSite { IliacWing = 0, PelvicRing = 1, VerticalShear = 2 };

struct PhantomSpec {
  Eigen::Vector3i dims{64, 64, 64};
  Eigen::Vector3d spacing{2.0, 2.0, 2.0};  // mm
  /// Ground-truth plane; by default the mid-grid plane with normal +x.
  SymmetryPlane base_plane;
  bool default_plane = true;  // when true, base_plane is derived from the grid
  std::uint64_t structure_seed = 0;
  double dislocation_fraction = 0.0;  // [0, 0.3] of the volume
  Eigen::Isometry3d dislocation_motion = Eigen::Isometry3d::Identity();
  bool default_motion = true;  // when true, a site-dependent motion is derived
  double noise_fraction = 0.0;  // [0, 0.4] of maximum intensity
  FractureSite site = FractureSite::IliacWing;

  void validate() const;
};

struct Landmark {
  std::string name;                 // L1..L4
  Eigen::Vector3d positive_side;   // world mm, on the +normal side
  Eigen::Vector3d negative_side;   // mirrored counterpart
};
using LandmarkSet = std::vector<Landmark>;

struct Phantom {
  Volume volume;
  SymmetryPlane plane;       // ground truth
  LandmarkSet landmarks;
  BinaryMask fragment;       // planted dislocated region (all-clear when none)
  Eigen::Isometry3d motion = Eigen::Isometry3d::Identity();
  bool has_fragment = false;
};

/// Builds a procedurally generated hemipelvis-like phantom: mirrored bone
/// structures (wing shell, ring tubes, sacral bar, femoral-head ball) inside a
/// soft-tissue ellipsoid, exactly symmetric about the ground-truth plane
/// before asymmetry injection. Deterministic per seed.
Phantom make_phantom(const PhantomSpec& spec);

/// Rigidly moves the fragment region; vacated voxels become soft tissue.
Volume apply_dislocation(const Volume& v, const BinaryMask& fragment,
                         const Eigen::Isometry3d& motion);

/// Plane + landmark sidecar serialization.
void save_sidecar(const SymmetryPlane& plane, const LandmarkSet& landmarks,
                  const std::string& path);
std::pair<SymmetryPlane, LandmarkSet> load_sidecar(const std::string& path);

}  // namespace symplane
