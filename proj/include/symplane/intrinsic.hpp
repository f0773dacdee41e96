#pragma once

#include "symplane/mesh.hpp"

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <vector>

namespace symplane {

/// Per-vertex scalar values aligned with a TriMesh.
using ScalarField = std::vector<double>;

/// Average geodesic distance: area-weighted mean of d(p, q) over all vertices.
ScalarField agd(const TriMesh& mesh);

/// Local extrema of the field over 1-ring neighborhoods, topped up with
/// farthest-point samples until k candidates. Deterministic. k >= 4.
std::vector<int> critical_points(const ScalarField& field, const TriMesh& mesh, int k);

/// Bijective map of mesh vertices onto the unit sphere; approximately
/// conformal (cotan-weighted iterative relaxation with inversive centering).
/// Throws when chi != 2 or face flips survive the iteration cap.
std::vector<Eigen::Vector3d> spherical_parameterization(const TriMesh& mesh);

/// Mean absolute corner-angle change between the mesh and a vertex map.
double mean_angle_distortion(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& mapped);

/// z = (x + iy) / (1 - w), projecting from the north pole (0,0,1).
std::complex<double> stereographic(const Eigen::Vector3d& p);
Eigen::Vector3d inverse_stereographic(const std::complex<double>& z);

/// Fractional linear map; with anti=true the input is conjugated first.
struct MobiusTransform {
  std::complex<double> a{1.0}, b{0.0}, c{0.0}, d{1.0};
  bool anti = false;

  std::complex<double> apply(std::complex<double> z) const {
    if (anti) z = std::conj(z);
    return (a * z + b) / (c * z + d);
  }
};

/// Anti-Mobius transform h with h(z_i) = w_i for the three given pairs.
MobiusTransform antimobius_from_pairs(
    const std::array<std::pair<std::complex<double>, std::complex<double>>, 3>& pairs);

/// Candidate symmetric point pair with cached world geometry.
struct Correspondence {
  int p = -1, q = -1;  // vertex ids, p != q
  Eigen::Vector3d pos_p, pos_q;
  Eigen::Vector3d midpoint;
  Eigen::Vector3d direction;  // unit, (pos_q - pos_p) normalized
  double score = 0.0;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  std::size_t size() const { return pairs.size(); }
};

/// Mutual-closest tolerance in normalized stereographic coordinates.
constexpr double kVoteTolerance = 0.05;

struct VoteResult {
  MobiusTransform transform;
  CorrespondenceSet correspondences;
  int inliers = 0;
};

/// Core voting loop on normalized plane coordinates. `partners[i]` lists the
/// candidate indices admissible as images of point i. When `world` is given
/// (one 3D position per point), trials whose inlier pairs are not direction-
/// coherent in 3D are discarded before accumulation. Returned pair indices
/// refer to positions in `z`.
VoteResult vote_on_plane(const std::vector<std::complex<double>>& z,
                         const std::vector<std::vector<int>>& partners, int trials,
                         std::uint64_t seed, double eps = kVoteTolerance,
                         const std::vector<Eigen::Vector3d>* world = nullptr);

/// Anti-Mobius voting over candidate vertices on the parameterized sphere;
/// returns the best transform and its mutually-closest correspondence pairs.
/// Throws when no trial reaches 4 inlier pairs.
VoteResult mobius_vote(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& sphere,
                       const std::vector<int>& candidates, int trials, std::uint64_t seed,
                       const ScalarField* agd_field = nullptr);

}  // namespace symplane
