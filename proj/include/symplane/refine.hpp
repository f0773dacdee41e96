#pragma once

#include "symplane/plane.hpp"
#include "symplane/volume.hpp"

#include <string>
#include <vector>

namespace symplane {

/// Redescending robust loss configuration.
struct TukeyConfig {
  double c = 4.685;       // 95% asymptotic efficiency cutoff
  double mad_floor = 1.0; // HU; lower bound on the residual scale
  /// When > 0, use this residual scale S instead of re-estimating it from the
  /// current residuals. Re-estimating S at every candidate plane makes the
  /// normalized loss nearly scale-invariant (a shifted plane inflates the
  /// residuals and S together), so the optimizer freezes S at the initial
  /// plane's estimate.
  double fixed_scale = 0.0;

  void validate() const;
};

/// Histogram configuration for the density-distribution regularizer.
struct NmiConfig {
  int bins = 64;
  double lo = 200.0;   // HU, bone window
  double hi = 3000.0;

  void validate() const;
};

struct CostReport {
  double d_I = 0.0;
  double d_D = 0.0;
  double lambda = 0.0;
  double total = 0.0;             // d_I + lambda * d_D
  double S = 0.0;                 // residual scale used
  double inlier_fraction = 0.0;   // share of samples with |e| <= c
  int iterations = 0;
  std::vector<double> trace;      // accepted total per optimizer iteration

  std::string to_json() const;
};

void save_cost_report(const CostReport& r, const std::string& path);

struct RefineConfig {
  double lambda = 0.5;
  TukeyConfig tukey;
  NmiConfig nmi;
  double angle_bound = 30.0 * M_PI / 180.0;  // radians around init
  double offset_bound = 50.0;                // mm around init
  int max_iter = 100;  // per optimization stage
  /// Smoothing (mm) for the coarse capture stage; 0 disables it. Smoothing
  /// widens the intensity ramps around bone and with them the attraction
  /// basin; the second stage runs at full resolution.
  double coarse_sigma = 4.0;
  bool use_nelder_mead = false;  // fallback optimizer; same acceptance behavior
  bool robust = true;            // false: plain L2 data term (ablation)
  double bone_threshold = 200.0; // HU lower bound defining the bone mask
  int dilate_radius = 2;         // voxels, evaluation-domain dilation
  std::size_t max_samples = 200000;

  void validate() const;
};

/// Intensity residuals r_i = I(o_i) - I(M(o_i)) over the set voxels of the
/// domain mask, in voxel scan order. Throws on an empty domain.
std::vector<double> residuals(const Volume& v, const ReflectionMap& m, const BinaryMask& domain);

/// Robust scale S = max(mad_floor, MAD / 0.6745) with
/// MAD = median(|r - median(r)|). Throws on empty input.
double mad_scale(std::vector<double> r, double mad_floor = 1.0);

/// Redescending influence value: e * (1 - (e/c)^2)^2 for |e| <= c, else 0.
double tukey_rho(double e, double c);

/// Biweight loss, the integral of |tukey_rho|: (c^2/6)(1 - (1 - (e/c)^2)^3)
/// for |e| <= c, saturating at c^2/6 beyond. Minimizing the redescending
/// tukey_rho directly would reward residuals past the cutoff (they cost 0);
/// the saturating form suppresses them without rewarding them, which is what
/// d_I needs to stay anchored to the symmetric anatomy.
double tukey_cost(double e, double c);

struct RobustLoss {
  double d_I = 0.0;
  double S = 0.0;
  double inlier_fraction = 0.0;
};

/// d_I = sum_i |rho(r_i / S)| / N over the domain, with S from mad_scale.
RobustLoss tukey_loss(const Volume& v, const ReflectionMap& m, const BinaryMask& domain,
                      const TukeyConfig& cfg);

/// Density-distribution regularizer d_D = -(H(X) + H(Y)) / H(X, Y) in [-2, -1].
/// X: masked intensities on the positive side of the plane; Y: trilinear
/// samples at the reflections of the same lattice points. Throws if either
/// half-space holds no masked voxels.
double nmi_loss(const Volume& v, const ReflectionMap& m, const SymmetryPlane& plane,
                const BinaryMask& bone, const NmiConfig& cfg);

/// Entropy-based oracle on paired samples; exposed for testing.
double nmi_from_pairs(const std::vector<double>& x, const std::vector<double>& y,
                      const NmiConfig& cfg);

/// Bone mask dilated by dilate_radius, subsampled with a fixed stride so that
/// at most max_samples voxels remain set.
BinaryMask evaluation_domain(const Volume& v, const RefineConfig& cfg);

/// Full objective at the given parameters (trace/iterations left empty).
CostReport total_cost(const Volume& v, const PlaneParams& params, const BinaryMask& domain,
                      const BinaryMask& bone, const RefineConfig& cfg);

struct RefineResult {
  SymmetryPlane plane;
  CostReport report;
};

/// Bound-constrained derivative-free minimization of the total cost over the
/// 3-DOF plane parameters, bounds angle_bound/offset_bound around init,
/// at most max_iter iterations. Deterministic; never returns a plane whose
/// total exceeds the initial total.
RefineResult optimize_plane(const Volume& v, const SymmetryPlane& init, const RefineConfig& cfg);

/// Symmetry violators: domain voxels with |r_i / S| > c, with connected blobs
/// smaller than min_blob voxels removed.
BinaryMask outlier_mask(const Volume& v, const ReflectionMap& m, const BinaryMask& domain,
                        const TukeyConfig& cfg, int min_blob = 20);

}  // namespace symplane
