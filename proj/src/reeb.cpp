#include "symplane/reeb.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <stdexcept>

namespace symplane {

namespace {

/// 8-connected component labels within slice k; returns labels and count.
std::pair<std::vector<int>, int> label_slice(const BinaryMask& m, int k) {
  const int nx = m.dims.x(), ny = m.dims.y();
  std::vector<int> label(static_cast<std::size_t>(nx) * ny, -1);
  int next = 0;
  std::vector<int> stack;
  for (int start = 0; start < nx * ny; ++start) {
    const int si = start % nx, sj = start / nx;
    if (!m.get(si, sj, k) || label[start] >= 0) continue;
    label[start] = next;
    stack.assign(1, start);
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      const int i = cur % nx, j = cur / nx;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const int ii = i + di, jj = j + dj;
          if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) continue;
          const int t = ii + nx * jj;
          if (m.get(ii, jj, k) && label[t] < 0) {
            label[t] = next;
            stack.push_back(t);
          }
        }
    }
    ++next;
  }
  return {std::move(label), next};
}

/// Fills enclosed cavities: clear voxels not 6-connected to the grid boundary.
bool fill_cavities(BinaryMask& m) {
  const int nx = m.dims.x(), ny = m.dims.y(), nz = m.dims.z();
  std::vector<std::uint8_t> outside(m.bits.size(), 0);
  std::deque<std::size_t> queue;
  auto push = [&](int i, int j, int k) {
    const std::size_t s = m.linear(i, j, k);
    if (!m.bits[s] && !outside[s]) {
      outside[s] = 1;
      queue.push_back(s);
    }
  };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1) push(i, j, k);
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    const int i = static_cast<int>(s % nx);
    const int j = static_cast<int>((s / nx) % ny);
    const int k = static_cast<int>(s / (static_cast<std::size_t>(nx) * ny));
    if (i > 0) push(i - 1, j, k);
    if (i < nx - 1) push(i + 1, j, k);
    if (j > 0) push(i, j - 1, k);
    if (j < ny - 1) push(i, j + 1, k);
    if (k > 0) push(i, j, k - 1);
    if (k < nz - 1) push(i, j, k + 1);
  }
  bool changed = false;
  for (std::size_t s = 0; s < m.bits.size(); ++s)
    if (!m.bits[s] && !outside[s]) {
      m.bits[s] = 1;
      changed = true;
    }
  return changed;
}

/// Removes 26-connected components smaller than the fragment threshold.
void remove_small_fragments(BinaryMask& m) {
  auto [label, n] = connected_components_3d(m);
  if (n <= 1) return;
  std::vector<std::size_t> sizes(n, 0);
  for (std::size_t s = 0; s < m.bits.size(); ++s)
    if (m.bits[s]) ++sizes[label[s]];
  const std::size_t total = m.count();
  for (std::size_t s = 0; s < m.bits.size(); ++s)
    if (m.bits[s] && static_cast<double>(sizes[label[s]]) < kSmallFragmentFraction * total)
      m.bits[s] = 0;
}

/// Andrew monotone chain; points as (i,j); returns CCW hull.
std::vector<Eigen::Vector2i> convex_hull_2d(std::vector<Eigen::Vector2i> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const int n = static_cast<int>(pts.size());
  if (n <= 2) return pts;
  auto cross = [](const Eigen::Vector2i& o, const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
    return static_cast<long long>(a.x() - o.x()) * (b.y() - o.y()) -
           static_cast<long long>(a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2i> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const int lower = k + 1;
  for (int i = n - 2; i >= 0; --i) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Fills the 2D convex hull of the union of the given slice components into
/// the mask; merging all cycle components of a slice is what actually severs
/// a handle whose two branches cross the slice separately.
void fill_components_hull(BinaryMask& m, int slice, const std::vector<int>& labels,
                          const std::vector<int>& comps) {
  const int nx = m.dims.x(), ny = m.dims.y();
  std::vector<Eigen::Vector2i> pts;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      if (labels[i + nx * j] >= 0 &&
          std::find(comps.begin(), comps.end(), labels[i + nx * j]) != comps.end())
        pts.emplace_back(i, j);
  if (pts.empty()) return;
  const auto hull = convex_hull_2d(pts);
  if (hull.size() < 3) {
    for (const auto& p : pts) m.set(p.x(), p.y(), slice, true);
    return;
  }
  Eigen::Vector2i lo = hull[0], hi = hull[0];
  for (const auto& p : hull) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (int j = lo.y(); j <= hi.y(); ++j)
    for (int i = lo.x(); i <= hi.x(); ++i) {
      bool inside = true;
      for (std::size_t e = 0; e < hull.size() && inside; ++e) {
        const Eigen::Vector2i& a = hull[e];
        const Eigen::Vector2i& b = hull[(e + 1) % hull.size()];
        const long long c = static_cast<long long>(b.x() - a.x()) * (j - a.y()) -
                            static_cast<long long>(b.y() - a.y()) * (i - a.x());
        if (c < 0) inside = false;
      }
      if (inside) m.set(i, j, slice, true);
    }
}

/// Fills both clear voxels of every edge ring holding exactly one set
/// diagonal pair. Such rings pinch the boundary surface along the shared
/// lattice edge; filling both keeps the mask mirror-symmetric.
bool repair_pinched_edges(BinaryMask& m) {
  bool changed = false;
  bool pass_changed = true;
  while (pass_changed) {
    pass_changed = false;
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3, c = (a + 2) % 3;
      Eigen::Vector3i idx;
      for (idx[2] = 0; idx[2] < m.dims.z(); ++idx[2])
        for (idx[1] = 0; idx[1] < m.dims.y(); ++idx[1])
          for (idx[0] = 0; idx[0] < m.dims.x(); ++idx[0]) {
            if (idx[b] + 1 >= m.dims[b] || idx[c] + 1 >= m.dims[c]) continue;
            Eigen::Vector3i pb = idx, pc = idx, pbc = idx;
            pb[b] += 1;
            pc[c] += 1;
            pbc[b] += 1;
            pbc[c] += 1;
            const bool s00 = m.get(idx.x(), idx.y(), idx.z());
            const bool s11 = m.get(pbc.x(), pbc.y(), pbc.z());
            const bool s10 = m.get(pb.x(), pb.y(), pb.z());
            const bool s01 = m.get(pc.x(), pc.y(), pc.z());
            if ((s00 && s11 && !s10 && !s01) || (!s00 && !s11 && s10 && s01)) {
              m.set(idx.x(), idx.y(), idx.z(), true);
              m.set(pb.x(), pb.y(), pb.z(), true);
              m.set(pc.x(), pc.y(), pc.z(), true);
              m.set(pbc.x(), pbc.y(), pbc.z(), true);
              changed = pass_changed = true;
            }
          }
    }
  }
  return changed;
}

/// Fills 2D holes within each transverse slice (clear regions not 4-connected
/// to the slice border).
bool fill_slice_holes(BinaryMask& m) {
  const int nx = m.dims.x(), ny = m.dims.y(), nz = m.dims.z();
  bool changed = false;
  std::vector<std::uint8_t> outside(static_cast<std::size_t>(nx) * ny);
  std::vector<int> stack;
  for (int k = 0; k < nz; ++k) {
    std::fill(outside.begin(), outside.end(), 0);
    stack.clear();
    auto push = [&](int i, int j) {
      const int s = i + nx * j;
      if (!m.get(i, j, k) && !outside[s]) {
        outside[s] = 1;
        stack.push_back(s);
      }
    };
    for (int i = 0; i < nx; ++i) {
      push(i, 0);
      push(i, ny - 1);
    }
    for (int j = 0; j < ny; ++j) {
      push(0, j);
      push(nx - 1, j);
    }
    while (!stack.empty()) {
      const int s = stack.back();
      stack.pop_back();
      const int i = s % nx, j = s / nx;
      if (i > 0) push(i - 1, j);
      if (i < nx - 1) push(i + 1, j);
      if (j > 0) push(i, j - 1);
      if (j < ny - 1) push(i, j + 1);
    }
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (!m.get(i, j, k) && !outside[i + nx * j]) {
          m.set(i, j, k, true);
          changed = true;
        }
  }
  return changed;
}

}  // namespace

bool ReebGraph::has_cycle() const { return !cycle_nodes().empty(); }

std::vector<int> ReebGraph::cycle_nodes() const {
  const int n = static_cast<int>(nodes.size());
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, edge id)
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    adj[edges[e].first].emplace_back(edges[e].second, e);
    adj[edges[e].second].emplace_back(edges[e].first, e);
  }
  std::vector<int> parent(n, -1), depth(n, -1);
  std::vector<std::uint8_t> tree_edge(edges.size(), 0);
  std::deque<int> queue;
  for (int root = 0; root < n; ++root) {
    if (depth[root] >= 0) continue;
    depth[root] = 0;
    queue.assign(1, root);
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (auto [v, e] : adj[u])
        if (depth[v] < 0) {
          depth[v] = depth[u] + 1;
          parent[v] = u;
          tree_edge[e] = 1;
          queue.push_back(v);
        }
    }
  }
  std::vector<std::uint8_t> on_cycle(n, 0);
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    if (tree_edge[e]) continue;
    int u = edges[e].first, v = edges[e].second;
    if (u == v) continue;
    on_cycle[u] = on_cycle[v] = 1;
    while (u != v) {
      if (depth[u] < depth[v]) std::swap(u, v);
      u = parent[u];
      on_cycle[u] = 1;
    }
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (on_cycle[i]) out.push_back(i);
  return out;
}

ReebGraph build_reeb_graph(const BinaryMask& m) {
  if (m.count() == 0) throw std::invalid_argument("build_reeb_graph: empty mask");
  const int nx = m.dims.x(), ny = m.dims.y(), nz = m.dims.z();
  ReebGraph g;
  g.slice_labels.resize(nz);
  g.slice_node_offset.resize(nz, 0);
  std::vector<int> comps_per_slice(nz, 0);
  for (int k = 0; k < nz; ++k) {
    auto [labels, n] = label_slice(m, k);
    g.slice_node_offset[k] = static_cast<int>(g.nodes.size());
    for (int c = 0; c < n; ++c) g.nodes.emplace_back(k, c);
    g.slice_labels[k] = std::move(labels);
    comps_per_slice[k] = n;
  }
  std::vector<std::pair<int, int>> raw;
  for (int k = 0; k + 1 < nz; ++k) {
    const auto& la = g.slice_labels[k];
    const auto& lb = g.slice_labels[k + 1];
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int a = la[i + nx * j];
        if (a < 0) continue;
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int ii = i + di, jj = j + dj;
            if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) continue;
            const int b = lb[ii + nx * jj];
            if (b >= 0) raw.emplace_back(g.node_index(k, a), g.node_index(k + 1, b));
          }
      }
  }
  std::sort(raw.begin(), raw.end());
  raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
  g.edges = std::move(raw);
  return g;
}

std::pair<BinaryMask, TriMesh> close_genus(const BinaryMask& m, const ReebGraph& /*g*/) {
  BinaryMask mask = m;
  remove_small_fragments(mask);
  if (mask.count() == 0) throw std::invalid_argument("close_genus: nothing left after rejection");
  repair_pinched_edges(mask);
  fill_cavities(mask);

  constexpr int kMaxPasses = 16;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    ReebGraph graph = build_reeb_graph(mask);
    const auto cyc = graph.cycle_nodes();
    if (!cyc.empty()) {
      std::map<int, std::vector<int>> per_slice;
      for (int node : cyc) {
        const auto [slice, comp] = graph.nodes[node];
        per_slice[slice].push_back(comp);
      }
      for (const auto& [slice, comps] : per_slice)
        fill_components_hull(mask, slice, graph.slice_labels[slice], comps);
      repair_pinched_edges(mask);
      fill_cavities(mask);
      continue;
    }
    TriMesh mesh = extract_surface(mask);
    if (euler_characteristic(mesh) == 2) return {std::move(mask), std::move(mesh)};
    // handles invisible to the transverse Reeb graph: close in-slice holes
    bool changed = fill_slice_holes(mask);
    changed |= repair_pinched_edges(mask);
    changed |= fill_cavities(mask);
    if (!changed) {
      for (int k = 0; k < mask.dims.z(); ++k) {
        auto [labels, n] = label_slice(mask, k);
        std::vector<int> all(n);
        for (int c = 0; c < n; ++c) all[c] = c;
        if (n > 0) fill_components_hull(mask, k, labels, all);
      }
      fill_cavities(mask);
    }
  }
  throw std::runtime_error("close_genus: failed to reach genus zero within bounded passes");
}

}  // namespace symplane
