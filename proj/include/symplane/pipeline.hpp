#pragma once

#include "symplane/extrinsic_init.hpp"
#include "symplane/refine.hpp"

#include <stdexcept>
#include <string>

namespace symplane {

/// Failure of a named pipeline stage; the stage tag is machine-readable.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct DetectConfig {
  double bone_threshold = 200.0;
  int max_vertices = 4000;   // decimation target before the intrinsic stage
  int candidate_count = 48;  // AGD critical points fed to voting
  int vote_trials = 200000;
  RansacConfig ransac;
  RefineConfig refine;
  std::uint64_t seed = 0;
  bool skip_refine = false;  // stop after initialization

  void validate() const;
};

struct DetectResult {
  SymmetryPlane plane;       // final estimate
  InitResult init;           // voting + RANSAC stages
  CostReport report;         // empty when skip_refine
  BinaryMask outliers;       // symmetry violators at the final plane
  TriMesh mesh;              // decimated genus-zero surface
  std::vector<Eigen::Vector3d> sphere;
  std::vector<int> candidates;
  int downsample_factor = 1;
};

/// Full detection pipeline: bone segmentation, genus closure, decimation,
/// surface extraction, AGD candidates, spherical parameterization, Mobius
/// voting + RANSAC initialization, robust refinement, outlier mask.
/// Stage failures surface as StageError with the stage name.
DetectResult detect(const Volume& v, const DetectConfig& cfg);

}  // namespace symplane
