#pragma once

#include "symplane/volume.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace symplane {

/// Closed triangulated surface; vertices in world mm.
struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> faces;

  /// Per-vertex neighbor lists derived from the faces (sorted, unique).
  std::vector<std::vector<int>> adjacency() const;

  /// One third of incident face areas per vertex.
  std::vector<double> vertex_areas() const;

  double total_area() const;
};

/// Closed boundary surface between set and clear voxels, quad faces split in
/// two. Vertices at voxel corners are split per set-voxel cluster so every
/// edge has exactly two incident faces.
TriMesh extract_surface(const BinaryMask& m);

/// V - E + F; throws if the mesh is open or non-manifold.
int euler_characteristic(const TriMesh& mesh);

/// Dijkstra over the edge graph with Euclidean weights; throws when the mesh
/// is disconnected.
std::vector<double> geodesic_distances(const TriMesh& mesh, int source);

void save_off(const TriMesh& mesh, const std::string& path);

/// Block-downsampled mask: coarse bit set when the set fraction of its block
/// reaches `fill_fraction`. Grid metadata follows the block centers.
BinaryMask downsample_mask(const BinaryMask& m, int factor, double fill_fraction = 0.3);

}  // namespace symplane
