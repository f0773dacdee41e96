#pragma once

#include "symplane/mesh.hpp"
#include "symplane/volume.hpp"

#include <utility>
#include <vector>

namespace symplane {

/// Per-slice connected-component graph along the grid z-axis.
/// Node tags are (slice, component); edges connect adjacent slices only.
struct ReebGraph {
  std::vector<std::pair<int, int>> nodes;            // (slice, component)
  std::vector<std::pair<int, int>> edges;            // node index pairs
  std::vector<std::vector<int>> slice_labels;        // per-slice voxel labels (-1 clear)
  std::vector<int> slice_node_offset;                // node index of (slice, 0)

  int node_index(int slice, int comp) const { return slice_node_offset[slice] + comp; }
  bool has_cycle() const;
  /// Node indices lying on at least one cycle (union of fundamental cycles).
  std::vector<int> cycle_nodes() const;
};

/// Components by 2D 8-connectivity within each transverse slice; edges where
/// components of adjacent slices touch by 26-connectivity.
ReebGraph build_reeb_graph(const BinaryMask& m);

/// Removes detached small fragments, fills enclosed cavities, and closes all
/// Reeb-graph cycles by per-slice convex hulls until the boundary surface has
/// Euler characteristic 2. Throws if closure fails within bounded passes.
std::pair<BinaryMask, TriMesh> close_genus(const BinaryMask& m, const ReebGraph& g);

/// Fraction threshold below which detached components are rejected.
constexpr double kSmallFragmentFraction = 0.01;

}  // namespace symplane
