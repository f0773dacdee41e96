#pragma once

#include "symplane/intrinsic.hpp"
#include "symplane/plane.hpp"

#include <cstdint>
#include <string>

namespace symplane {

struct RansacConfig {
  int iterations = 500;
  double angle_tol = 5.0 * M_PI / 180.0;   // radians, stage 1
  double dist_tol = 0.9;                   // mm, stage 2
  int min_inliers = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Stage 1: consensus on correspondence directions (sign-insensitive).
CorrespondenceSet ransac_directions(const CorrespondenceSet& cs, const RansacConfig& cfg);

/// Stage 2: consensus on correspondence midpoints lying on one plane whose
/// normal stays within angle_tol of the stage-1 consensus direction.
CorrespondenceSet ransac_midpoints(const CorrespondenceSet& cs, const RansacConfig& cfg);

/// Least-variance plane through the midpoints: SVD of the mean-normalized
/// midpoint matrix; normal is the singular vector of least singular value.
SymmetryPlane fit_plane_svd(const CorrespondenceSet& cs);

struct InitResult {
  SymmetryPlane plane;
  int initial_pairs = 0;
  int ransac1_inliers = 0;
  int ransac2_inliers = 0;
  CorrespondenceSet inliers;  // stage-2 survivors
};

/// Full initialization: Mobius voting, the two RANSAC stages, and the SVD fit.
InitResult initialize(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& sphere,
                      const std::vector<int>& candidates, const RansacConfig& cfg,
                      int trials = 2000, const ScalarField* agd_field = nullptr);

void save_plane_json(const SymmetryPlane& plane, const std::string& path,
                     const InitResult* stages = nullptr);
SymmetryPlane load_plane_json(const std::string& path);

/// Correspondence dump for inspection.
void save_correspondences_json(const CorrespondenceSet& cs, const std::string& path);

}  // namespace symplane
