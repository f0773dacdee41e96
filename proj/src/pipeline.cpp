#include "symplane/pipeline.hpp"

#include "symplane/intrinsic.hpp"
#include "symplane/reeb.hpp"

#include <limits>

namespace symplane {

void DetectConfig::validate() const {
  if (max_vertices < 100) throw std::invalid_argument("detect: max_vertices too small");
  if (candidate_count < 4) throw std::invalid_argument("detect: need >= 4 candidates");
  if (vote_trials < 1) throw std::invalid_argument("detect: vote_trials must be >= 1");
  ransac.validate();
  refine.validate();
}

namespace {

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

DetectResult detect(const Volume& v, const DetectConfig& cfg) {
  cfg.validate();
  DetectResult res;

  const BinaryMask bone = stage("segment", [&] {
    // median-denoised segmentation for the geometric stages; refinement
    // still evaluates the raw intensities
    const Volume smoothed = median_filter3(v);
    BinaryMask m =
        threshold_segment(smoothed, cfg.bone_threshold, std::numeric_limits<double>::infinity());
    if (m.count() == 0) throw std::runtime_error("no voxels above the bone threshold");
    return m;
  });

  // Decimate by block-downsampling until the closed surface fits the vertex
  // budget; downsampling precedes closure so closure acts on the final grid.
  // If the sphere map fails to untangle at one resolution, retry coarser.
  ScalarField field;
  std::string sphere_failure;
  const bool ok = stage("surface", [&] {
    for (int factor = 1; factor <= 8; ++factor) {
      BinaryMask coarse = factor == 1 ? bone : downsample_mask(bone, factor);
      if (coarse.count() == 0) continue;
      auto [closed, mesh] = close_genus(coarse, build_reeb_graph(coarse));
      if (static_cast<int>(mesh.vertices.size()) > cfg.max_vertices && factor < 8) continue;
      try {
        std::vector<Eigen::Vector3d> sphere = spherical_parameterization(mesh);
        res.sphere = std::move(sphere);
      } catch (const std::exception& e) {
        sphere_failure = e.what();
        if (factor < 8) continue;
        return false;
      }
      res.mesh = std::move(mesh);
      res.downsample_factor = factor;
      return true;
    }
    throw std::runtime_error("decimation failed to reach the vertex budget");
  });
  if (!ok) throw StageError("intrinsic", sphere_failure);
  if (static_cast<int>(res.mesh.vertices.size()) > cfg.max_vertices)
    throw StageError("surface", "decimation failed to reach the vertex budget");

  stage("intrinsic", [&] {
    field = agd(res.mesh);
    res.candidates = critical_points(field, res.mesh, cfg.candidate_count);
    return 0;
  });

  res.init = stage("initialize", [&] {
    RansacConfig rc = cfg.ransac;
    rc.seed = cfg.seed;
    // pair directions and midpoints inherit the quantization of the decimated
    // grid; widen the tolerances proportionally when forced onto a coarser one
    const double quant = res.downsample_factor * v.spacing.maxCoeff();
    const double scale = std::max(1.0, quant / 4.0);
    rc.angle_tol *= scale;
    rc.dist_tol *= scale;
    return initialize(res.mesh, res.sphere, res.candidates, rc, cfg.vote_trials, &field);
  });
  res.plane = res.init.plane;

  if (!cfg.skip_refine) {
    const RefineResult refined =
        stage("refine", [&] { return optimize_plane(v, res.init.plane, cfg.refine); });
    res.plane = refined.plane;
    res.report = refined.report;
    res.outliers = stage("outliers", [&] {
      const ReflectionMap m = reflection_from_plane(res.plane);
      return outlier_mask(v, m, evaluation_domain(v, cfg.refine), cfg.refine.tukey);
    });
  }
  return res;
}

}  // namespace symplane
