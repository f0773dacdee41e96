#include "symplane/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace symplane {

std::vector<std::vector<int>> TriMesh::adjacency() const {
  std::vector<std::vector<int>> adj(vertices.size());
  for (const auto& f : faces)
    for (int e = 0; e < 3; ++e) {
      const int a = f[e], b = f[(e + 1) % 3];
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  for (auto& lst : adj) {
    std::sort(lst.begin(), lst.end());
    lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
  }
  return adj;
}

std::vector<double> TriMesh::vertex_areas() const {
  std::vector<double> area(vertices.size(), 0.0);
  for (const auto& f : faces) {
    const Eigen::Vector3d& a = vertices[f[0]];
    const Eigen::Vector3d& b = vertices[f[1]];
    const Eigen::Vector3d& c = vertices[f[2]];
    const double third = (b - a).cross(c - a).norm() / 6.0;
    area[f[0]] += third;
    area[f[1]] += third;
    area[f[2]] += third;
  }
  return area;
}

double TriMesh::total_area() const {
  double s = 0.0;
  for (const auto& f : faces)
    s += 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
  return s;
}

namespace {

// Component of set voxels incident to a corner, 6-connected within the
// corner's 2x2x2 cell neighborhood; identified by its minimum voxel id.
std::uint64_t corner_class(const BinaryMask& m, int ci, int cj, int ck, int vi, int vj, int vk) {
  bool set[2][2][2] = {};
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) {
        const int i = ci - 1 + di, j = cj - 1 + dj, k = ck - 1 + dk;
        set[di][dj][dk] = m.in_bounds(i, j, k) && m.get(i, j, k);
      }
  const int si = vi - (ci - 1), sj = vj - (cj - 1), sk = vk - (ck - 1);
  bool visited[2][2][2] = {};
  int stack[8][3];
  int top = 0;
  stack[top][0] = si;
  stack[top][1] = sj;
  stack[top][2] = sk;
  ++top;
  visited[si][sj][sk] = true;
  std::uint64_t min_id = std::numeric_limits<std::uint64_t>::max();
  while (top > 0) {
    --top;
    const int a = stack[top][0], b = stack[top][1], c = stack[top][2];
    const std::uint64_t id = m.linear(ci - 1 + a, cj - 1 + b, ck - 1 + c);
    min_id = std::min(min_id, id);
    const int deltas[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const auto& d : deltas) {
      const int na = a + d[0], nb = b + d[1], nc = c + d[2];
      if (na < 0 || nb < 0 || nc < 0 || na > 1 || nb > 1 || nc > 1) continue;
      if (!set[na][nb][nc] || visited[na][nb][nc]) continue;
      visited[na][nb][nc] = true;
      stack[top][0] = na;
      stack[top][1] = nb;
      stack[top][2] = nc;
      ++top;
    }
  }
  return min_id;
}

}  // namespace

TriMesh extract_surface(const BinaryMask& m) {
  if (m.count() == 0) throw std::invalid_argument("extract_surface: empty mask");
  const int nx = m.dims.x(), ny = m.dims.y(), nz = m.dims.z();

  TriMesh mesh;
  std::unordered_map<std::uint64_t, int> vertex_of;
  const std::uint64_t cx = nx + 1, cy = ny + 1, cz = nz + 1;

  auto vertex_id = [&](int ci, int cj, int ck, int vi, int vj, int vk) {
    const std::uint64_t corner = ci + cx * (cj + cy * static_cast<std::uint64_t>(ck));
    const std::uint64_t cls = corner_class(m, ci, cj, ck, vi, vj, vk);
    const std::uint64_t key = corner + cx * cy * cz * cls;
    auto it = vertex_of.find(key);
    if (it != vertex_of.end()) return it->second;
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(m.origin + (Eigen::Vector3d(ci, cj, ck) - Eigen::Vector3d(0.5, 0.5, 0.5))
                                           .cwiseProduct(m.spacing));
    vertex_of.emplace(key, id);
    return id;
  };

  // (axis a, sign): quad corners wound CCW seen from outside
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!m.get(i, j, k)) continue;
        const int vox[3] = {i, j, k};
        for (int a = 0; a < 3; ++a)
          for (int s = -1; s <= 1; s += 2) {
            int ni = i, nj = j, nk = k;
            (a == 0 ? ni : a == 1 ? nj : nk) += s;
            if (m.in_bounds(ni, nj, nk) && m.get(ni, nj, nk)) continue;

            const int b = (a + 1) % 3, c = (a + 2) % 3;
            int base[3];
            base[a] = vox[a] + (s > 0 ? 1 : 0);
            base[b] = vox[b];
            base[c] = vox[c];
            const int offs[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
            int q[4];
            for (int t = 0; t < 4; ++t) {
              int corner[3] = {base[0], base[1], base[2]};
              corner[b] += offs[t][0];
              corner[c] += offs[t][1];
              q[t] = vertex_id(corner[0], corner[1], corner[2], i, j, k);
            }
            if (s > 0) {
              mesh.faces.push_back({q[0], q[1], q[2]});
              mesh.faces.push_back({q[0], q[2], q[3]});
            } else {
              mesh.faces.push_back({q[0], q[2], q[1]});
              mesh.faces.push_back({q[0], q[3], q[2]});
            }
          }
      }
  return mesh;
}

int euler_characteristic(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> edge_count;
  edge_count.reserve(mesh.faces.size() * 2);
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) {
      const std::uint64_t a = std::min(f[e], f[(e + 1) % 3]);
      const std::uint64_t b = std::max(f[e], f[(e + 1) % 3]);
      ++edge_count[(a << 32) | b];
    }
  for (const auto& [k, c] : edge_count)
    if (c != 2) throw std::invalid_argument("euler_characteristic: mesh is not closed");
  return static_cast<int>(mesh.vertices.size()) - static_cast<int>(edge_count.size()) +
         static_cast<int>(mesh.faces.size());
}

std::vector<double> geodesic_distances(const TriMesh& mesh, int source) {
  if (source < 0 || source >= static_cast<int>(mesh.vertices.size()))
    throw std::out_of_range("geodesic_distances: bad source vertex");
  const auto adj = mesh.adjacency();
  std::vector<double> dist(mesh.vertices.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[source] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (int v : adj[u]) {
      const double nd = d + (mesh.vertices[u] - mesh.vertices[v]).norm();
      if (nd < dist[v]) {
        dist[v] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  for (double d : dist)
    if (!std::isfinite(d)) throw std::invalid_argument("geodesic_distances: disconnected mesh");
  return dist;
}

void save_off(const TriMesh& mesh, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_off: cannot open " + path);
  f << "OFF\n" << mesh.vertices.size() << " " << mesh.faces.size() << " 0\n";
  f.precision(12);
  for (const auto& v : mesh.vertices) f << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& t : mesh.faces) f << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
}

BinaryMask downsample_mask(const BinaryMask& m, int factor, double fill_fraction) {
  if (factor <= 1) return m;
  BinaryMask out;
  out.dims = Eigen::Vector3i((m.dims.x() + factor - 1) / factor, (m.dims.y() + factor - 1) / factor,
                             (m.dims.z() + factor - 1) / factor);
  out.spacing = m.spacing * factor;
  out.origin = m.origin + 0.5 * (factor - 1) * m.spacing;
  out.bits.assign(static_cast<std::size_t>(out.dims.x()) * out.dims.y() * out.dims.z(), 0);
  for (int K = 0; K < out.dims.z(); ++K)
    for (int J = 0; J < out.dims.y(); ++J)
      for (int I = 0; I < out.dims.x(); ++I) {
        int set = 0, tot = 0;
        for (int k = K * factor; k < std::min((K + 1) * factor, m.dims.z()); ++k)
          for (int j = J * factor; j < std::min((J + 1) * factor, m.dims.y()); ++j)
            for (int i = I * factor; i < std::min((I + 1) * factor, m.dims.x()); ++i) {
              ++tot;
              if (m.get(i, j, k)) ++set;
            }
        if (tot > 0 && set >= fill_fraction * tot && set > 0)
          out.bits[out.linear(I, J, K)] = 1;
      }
  return out;
}

}  // namespace symplane
