#include <doctest.h>

#include "symplane/mesh.hpp"

#include <algorithm>
#include <map>
#include <queue>

using namespace symplane;

namespace {

BinaryMask make_mask(int nx, int ny, int nz) {
  BinaryMask m;
  m.dims = {nx, ny, nz};
  m.bits.assign(static_cast<std::size_t>(nx) * ny * nz, 0);
  return m;
}

// every edge of a closed 2-manifold triangle mesh has exactly two incident faces
bool edges_are_two_manifold(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) {
      int a = f[e], b = f[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edge_count[{a, b}];
    }
  return std::all_of(edge_count.begin(), edge_count.end(),
                     [](const auto& kv) { return kv.second == 2; });
}

// exhaustive Dijkstra oracle over the explicit edge list
std::vector<double> dijkstra_oracle(const TriMesh& mesh, int source) {
  const auto adj = mesh.adjacency();
  std::vector<double> dist(mesh.vertices.size(), 1e300);
  dist[source] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  heap.push({0.0, source});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (int v : adj[u]) {
      const double nd = d + (mesh.vertices[u] - mesh.vertices[v]).norm();
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.push({nd, v});
      }
    }
  }
  return dist;
}

TriMesh icosahedron() {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, p, 0}, {1, p, 0},   {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                {0, -1, -p}, {0, 1, -p}, {p, 0, -1},  {p, 0, 1},  {-p, 0, -1}, {-p, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
             {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
             {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
             {8, 6, 7},  {9, 8, 1}};
  return m;
}

}  // namespace

TEST_CASE("extract_surface of a single voxel is a closed 12-triangle cube") {
  BinaryMask m = make_mask(3, 3, 3);
  m.set(1, 1, 1, true);
  const TriMesh mesh = extract_surface(m);
  CHECK(mesh.faces.size() == 12);
  CHECK(mesh.total_area() == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(edges_are_two_manifold(mesh));
  CHECK(euler_characteristic(mesh) == 2);
}

TEST_CASE("extract_surface of a 2x1x1 block has area 10") {
  BinaryMask m = make_mask(4, 3, 3);
  m.set(1, 1, 1, true);
  m.set(2, 1, 1, true);
  const TriMesh mesh = extract_surface(m);
  CHECK(mesh.total_area() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(edges_are_two_manifold(mesh));
}

TEST_CASE("extract_surface rejects an empty mask and is deterministic") {
  BinaryMask empty = make_mask(3, 3, 3);
  CHECK_THROWS(extract_surface(empty));

  BinaryMask m = make_mask(6, 6, 6);
  for (int k = 1; k < 5; ++k)
    for (int j = 1; j < 5; ++j)
      for (int i = 1; i < 4; ++i) m.set(i, j, k, true);
  const TriMesh a = extract_surface(m);
  const TriMesh b = extract_surface(m);
  CHECK(a.vertices == b.vertices);
  CHECK(a.faces == b.faces);
}

TEST_CASE("euler_characteristic on reference polyhedra") {
  TriMesh tet;
  tet.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  tet.faces = {{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}};
  CHECK(euler_characteristic(tet) == 2);  // V=4, E=6, F=4

  TriMesh oct;
  oct.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  oct.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
               {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  CHECK(euler_characteristic(oct) == 2);  // V=6, E=12, F=8

  TriMesh open = tet;
  open.faces.pop_back();
  CHECK_THROWS(euler_characteristic(open));
}

TEST_CASE("voxel torus surface has Euler characteristic 0") {
  BinaryMask m = make_mask(7, 7, 3);
  for (int j = 1; j <= 5; ++j)
    for (int i = 1; i <= 5; ++i)
      if (!(i >= 3 && i <= 3 && j >= 3 && j <= 3)) m.set(i, j, 1, true);
  m.set(3, 3, 1, false);  // the hole
  const TriMesh mesh = extract_surface(m);
  CHECK(euler_characteristic(mesh) == 0);
}

TEST_CASE("geodesic distances: basics and exhaustive oracle on the icosahedron") {
  const TriMesh ico = icosahedron();
  for (int s : {0, 3, 7}) {
    const auto d = geodesic_distances(ico, s);
    CHECK(d[s] == 0.0);
    const auto oracle = dijkstra_oracle(ico, s);
    for (std::size_t v = 0; v < d.size(); ++v) CHECK(d[v] == doctest::Approx(oracle[v]).epsilon(1e-12));
  }

  // adjacent vertices: distance equals the edge length
  const auto d0 = geodesic_distances(ico, 0);
  const auto adj = ico.adjacency();
  for (int v : adj[0])
    CHECK(d0[v] == doctest::Approx((ico.vertices[0] - ico.vertices[v]).norm()).epsilon(1e-12));
}

TEST_CASE("geodesic distances are symmetric and satisfy the triangle inequality") {
  const TriMesh ico = icosahedron();
  std::vector<std::vector<double>> all;
  for (std::size_t s = 0; s < ico.vertices.size(); ++s) all.push_back(geodesic_distances(ico, int(s)));
  for (std::size_t u = 0; u < all.size(); ++u)
    for (std::size_t v = 0; v < all.size(); ++v) {
      CHECK(all[u][v] == doctest::Approx(all[v][u]).epsilon(1e-12));
      for (std::size_t w = 0; w < all.size(); ++w)
        CHECK(all[u][v] <= all[u][w] + all[w][v] + 1e-12);
    }
}

TEST_CASE("geodesic distances reject disconnected meshes") {
  BinaryMask m = make_mask(8, 3, 3);
  m.set(1, 1, 1, true);
  m.set(5, 1, 1, true);  // two separate cubes
  const TriMesh mesh = extract_surface(m);
  CHECK_THROWS(geodesic_distances(mesh, 0));
}

TEST_CASE("downsample_mask follows block centers") {
  BinaryMask m = make_mask(8, 8, 8);
  m.spacing = {1.0, 1.0, 1.0};
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) m.set(i, j, k, true);
  const BinaryMask d = downsample_mask(m, 2);
  CHECK(d.dims == Eigen::Vector3i(4, 4, 4));
  CHECK(d.spacing == Eigen::Vector3d(2.0, 2.0, 2.0));
  CHECK(d.count() == 8);  // the filled octant survives
}
