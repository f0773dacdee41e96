#include "symplane/intrinsic.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <map>
#include <random>
#include <stdexcept>

namespace symplane {

ScalarField agd(const TriMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  const auto areas = mesh.vertex_areas();
  const double total = std::accumulate(areas.begin(), areas.end(), 0.0);
  if (total <= 0.0) throw std::invalid_argument("agd: degenerate mesh");
  ScalarField phi(n, 0.0);
  for (int p = 0; p < n; ++p) {
    const auto dist = geodesic_distances(mesh, p);
    double acc = 0.0;
    for (int q = 0; q < n; ++q) acc += areas[q] * dist[q];
    phi[p] = acc / total;
  }
  return phi;
}

std::vector<int> critical_points(const ScalarField& field, const TriMesh& mesh, int k) {
  if (k < 4) throw std::invalid_argument("critical_points: k must be >= 4");
  if (field.size() != mesh.vertices.size())
    throw std::invalid_argument("critical_points: field not aligned with mesh");
  const auto adj = mesh.adjacency();
  const int n = static_cast<int>(mesh.vertices.size());

  std::vector<int> extrema;
  for (int v = 0; v < n; ++v) {
    bool lo = true, hi = true;
    for (int u : adj[v]) {
      if (field[u] <= field[v]) lo = false;
      if (field[u] >= field[v]) hi = false;
    }
    if ((lo || hi) && !adj[v].empty()) extrema.push_back(v);
  }
  // most prominent extrema first
  const double mid = std::accumulate(field.begin(), field.end(), 0.0) / n;
  std::sort(extrema.begin(), extrema.end(), [&](int a, int b) {
    const double pa = std::abs(field[a] - mid), pb = std::abs(field[b] - mid);
    return pa > pb || (pa == pb && a < b);
  });
  if (static_cast<int>(extrema.size()) > k) extrema.resize(k);

  std::vector<int> out = extrema;
  std::vector<std::uint8_t> used(n, 0);
  for (int v : out) used[v] = 1;
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  for (int v = 0; v < n; ++v)
    for (int s : out) mind[v] = std::min(mind[v], (mesh.vertices[v] - mesh.vertices[s]).norm());
  while (static_cast<int>(out.size()) < std::min(k, n)) {
    int best = -1;
    double bestd = -1.0;
    for (int v = 0; v < n; ++v) {
      if (used[v]) continue;
      const double d = out.empty() ? 0.0 : mind[v];
      if (d > bestd) {
        bestd = d;
        best = v;
      }
    }
    if (best < 0) break;
    used[best] = 1;
    out.push_back(best);
    for (int v = 0; v < n; ++v)
      mind[v] = std::min(mind[v], (mesh.vertices[v] - mesh.vertices[best]).norm());
  }
  return out;
}

namespace {

/// Conformal sphere inversion; fixes the unit sphere, moves mass away from c.
Eigen::Vector3d sphere_inversion(const Eigen::Vector3d& p, const Eigen::Vector3d& c) {
  Eigen::Vector3d q = p - c;
  q *= (1.0 - c.squaredNorm()) / q.squaredNorm();
  return (q - c).normalized();
}

Eigen::Vector3d area_center(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& pts) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d& a = pts[f[0]];
    const Eigen::Vector3d& b = pts[f[1]];
    const Eigen::Vector3d& d = pts[f[2]];
    const double area = 0.5 * (b - a).cross(d - a).norm();
    c += area * (a + b + d) / 3.0;
    total += area;
  }
  return total > 0.0 ? Eigen::Vector3d(c / total) : c;
}

int count_flips(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& pts) {
  int flips = 0;
  for (const auto& f : mesh.faces) {
    const double det = pts[f[0]].cross(pts[f[1]]).dot(pts[f[2]]);
    if (det <= 0.0) ++flips;
  }
  return flips;
}

}  // namespace

namespace {

std::vector<Eigen::Vector3d> relax_to_sphere(const TriMesh& mesh, bool cotan_weights);

}  // namespace

std::vector<Eigen::Vector3d> spherical_parameterization(const TriMesh& mesh) {
  if (euler_characteristic(mesh) != 2)
    throw std::invalid_argument("spherical_parameterization: mesh is not genus zero");
  // conformal (cotan) weights first; fall back to the more robust uniform
  // weights when the conformal relaxation fails to untangle
  try {
    return relax_to_sphere(mesh, true);
  } catch (const std::runtime_error&) {
    return relax_to_sphere(mesh, false);
  }
}

namespace {

std::vector<Eigen::Vector3d> relax_to_sphere(const TriMesh& mesh, bool cotan_weights) {
  const int n = static_cast<int>(mesh.vertices.size());
  const auto adj = mesh.adjacency();

  // edge weights from the input geometry, clamped positive
  std::vector<std::vector<double>> weight(n);
  for (int v = 0; v < n; ++v) weight[v].assign(adj[v].size(), cotan_weights ? 0.0 : 1.0);
  if (cotan_weights) {
    auto add_weight = [&](int a, int b, double w) {
      const auto& lst = adj[a];
      const auto it = std::lower_bound(lst.begin(), lst.end(), b);
      weight[a][static_cast<std::size_t>(it - lst.begin())] += w;
    };
    for (const auto& f : mesh.faces)
      for (int e = 0; e < 3; ++e) {
        const int i = f[e], j = f[(e + 1) % 3], o = f[(e + 2) % 3];
        const Eigen::Vector3d u = mesh.vertices[i] - mesh.vertices[o];
        const Eigen::Vector3d v = mesh.vertices[j] - mesh.vertices[o];
        const double cot = u.dot(v) / std::max(u.cross(v).norm(), 1e-12);
        add_weight(i, j, 0.5 * cot);
        add_weight(j, i, 0.5 * cot);
      }
    for (int v = 0; v < n; ++v)
      for (double& w : weight[v]) w = std::max(w, 0.05);
  }

  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : mesh.vertices) centroid += p;
  centroid /= n;
  std::vector<Eigen::Vector3d> x(n);
  for (int v = 0; v < n; ++v) {
    Eigen::Vector3d d = mesh.vertices[v] - centroid;
    x[v] = d.norm() > 1e-12 ? Eigen::Vector3d(d.normalized()) : Eigen::Vector3d::UnitX();
  }

  constexpr int kMaxSweeps = 2000;
  auto recenter = [&]() {
    for (int it = 0; it < 20; ++it) {
      Eigen::Vector3d c = area_center(mesh, x);
      if (c.norm() < 1e-4) break;
      if (c.norm() > 0.9) c *= 0.9 / c.norm();
      for (auto& p : x) p = sphere_inversion(p, c);
    }
  };
  double move = 1.0;
  for (int sweep = 0; sweep < kMaxSweeps && move > 1e-10; ++sweep) {
    move = 0.0;
    for (int v = 0; v < n; ++v) {
      Eigen::Vector3d avg = Eigen::Vector3d::Zero();
      for (std::size_t e = 0; e < adj[v].size(); ++e) avg += weight[v][e] * x[adj[v][e]];
      if (avg.norm() < 1e-14) continue;
      avg.normalize();
      move = std::max(move, (avg - x[v]).norm());
      x[v] = avg;
    }
    recenter();
  }

  // untangle residual flips with extra local relaxation
  for (int extra = 0; extra < 5000 && count_flips(mesh, x) > 0; ++extra) {
    std::vector<std::uint8_t> active(n, 0);
    for (const auto& f : mesh.faces)
      if (x[f[0]].cross(x[f[1]]).dot(x[f[2]]) <= 0.0)
        for (int e = 0; e < 3; ++e) {
          active[f[e]] = 1;
          for (int u : adj[f[e]]) active[u] = 1;
        }
    for (int v = 0; v < n; ++v) {
      if (!active[v]) continue;
      Eigen::Vector3d avg = Eigen::Vector3d::Zero();
      for (std::size_t e = 0; e < adj[v].size(); ++e) avg += weight[v][e] * x[adj[v][e]];
      if (avg.norm() > 1e-14) x[v] = avg.normalized();
    }
    recenter();
  }
  if (count_flips(mesh, x) > 0)
    throw std::runtime_error("spherical_parameterization: face flips remain after iteration cap");
  return x;
}

}  // namespace

double mean_angle_distortion(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& mapped) {
  double acc = 0.0;
  std::size_t cnt = 0;
  auto corner = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    const Eigen::Vector3d u = b - a, v = c - a;
    const double d = u.norm() * v.norm();
    if (d < 1e-15) return 0.0;
    return std::acos(std::clamp(u.dot(v) / d, -1.0, 1.0));
  };
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) {
      const int i = f[e], j = f[(e + 1) % 3], k = f[(e + 2) % 3];
      acc += std::abs(corner(mesh.vertices[i], mesh.vertices[j], mesh.vertices[k]) -
                      corner(mapped[i], mapped[j], mapped[k]));
      ++cnt;
    }
  return cnt ? acc / cnt : 0.0;
}

std::complex<double> stereographic(const Eigen::Vector3d& p) {
  if (std::abs(p.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("stereographic: point not on the unit sphere");
  if (1.0 - p.z() < 1e-14) return {std::numeric_limits<double>::infinity(), 0.0};
  return {p.x() / (1.0 - p.z()), p.y() / (1.0 - p.z())};
}

Eigen::Vector3d inverse_stereographic(const std::complex<double>& z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return Eigen::Vector3d(0, 0, 1);
  const double r2 = std::norm(z);
  return Eigen::Vector3d(2.0 * z.real(), 2.0 * z.imag(), r2 - 1.0) / (r2 + 1.0);
}

MobiusTransform antimobius_from_pairs(
    const std::array<std::pair<std::complex<double>, std::complex<double>>, 3>& pairs) {
  using C = std::complex<double>;
  // 2x2 matrix sending p1,p2,p3 -> 0,1,inf
  auto to_standard = [](C p1, C p2, C p3) {
    Eigen::Matrix2cd m;
    m << p2 - p3, -p1 * (p2 - p3), p2 - p1, -p3 * (p2 - p1);
    return m;
  };
  const C z1 = std::conj(pairs[0].first), z2 = std::conj(pairs[1].first),
          z3 = std::conj(pairs[2].first);
  const C w1 = pairs[0].second, w2 = pairs[1].second, w3 = pairs[2].second;
  const Eigen::Matrix2cd A = to_standard(z1, z2, z3);
  const Eigen::Matrix2cd B = to_standard(w1, w2, w3);
  const C detB = B(0, 0) * B(1, 1) - B(0, 1) * B(1, 0);
  if (std::abs(detB) < 1e-15) throw std::invalid_argument("antimobius_from_pairs: degenerate pairs");
  Eigen::Matrix2cd Binv;
  Binv << B(1, 1), -B(0, 1), -B(1, 0), B(0, 0);
  const Eigen::Matrix2cd M = Binv * A;
  MobiusTransform h;
  h.a = M(0, 0);
  h.b = M(0, 1);
  h.c = M(1, 0);
  h.d = M(1, 1);
  h.anti = true;
  if (std::abs(h.a * h.d - h.b * h.c) < 1e-15)
    throw std::invalid_argument("antimobius_from_pairs: degenerate pairs");
  return h;
}

VoteResult vote_on_plane(const std::vector<std::complex<double>>& z,
                         const std::vector<std::vector<int>>& partners, int trials,
                         std::uint64_t seed, double eps,
                         const std::vector<Eigen::Vector3d>* world) {
  const int n = static_cast<int>(z.size());
  if (n < 3) throw std::invalid_argument("vote_on_plane: need at least 3 candidates");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  struct Trial {
    std::vector<std::pair<std::pair<int, int>, double>> pairs;
    MobiusTransform transform;
    double meandist = std::numeric_limits<double>::infinity();
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    int hits = 0;  // candidates mapped onto the set by the implied mirror
  };
  std::vector<Trial> passed;

  std::vector<std::complex<double>> warped(n);
  for (int trial = 0; trial < trials; ++trial) {
    // Quadruplet sampling: two candidate pairs (s1, d1) and (s2, d2). The
    // transform interpolates s1->d1, d1->s1, s2->d2, which biases trials
    // toward anti-involutions -- the only anti-Mobius maps realizable by a
    // mirror reflection of the surface.
    const int s1 = pick(rng);
    const auto& lst1 = partners[s1];
    if (lst1.empty()) continue;
    const int d1 = lst1[std::uniform_int_distribution<std::size_t>(0, lst1.size() - 1)(rng)];
    if (d1 == s1) continue;
    int s2 = pick(rng);
    if (s2 == s1 || s2 == d1) continue;
    const auto& lst2 = partners[s2];
    if (lst2.empty()) continue;
    const int d2 = lst2[std::uniform_int_distribution<std::size_t>(0, lst2.size() - 1)(rng)];
    if (d2 == s1 || d2 == d1) continue;

    MobiusTransform h;
    try {
      h = antimobius_from_pairs({std::pair{z[s1], z[d1]}, {z[d1], z[s1]}, {z[s2], z[d2]}});
    } catch (const std::invalid_argument&) {
      continue;
    }
    for (int i = 0; i < n; ++i) warped[i] = h.apply(z[i]);

    // reject trials whose transform is far from an involution
    double invol = 0.0;
    int invol_n = 0;
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(warped[i].real()) || !std::isfinite(warped[i].imag())) continue;
      const std::complex<double> back = h.apply(warped[i]);
      if (!std::isfinite(back.real()) || !std::isfinite(back.imag())) continue;
      invol += std::abs(back - z[i]);
      ++invol_n;
    }
    if (invol_n == 0 || invol / invol_n > eps) continue;

    // mutually closest pairs between warped and original points
    std::vector<int> fwd(n, -1), rev(n, -1);
    std::vector<double> fwd_d(n, std::numeric_limits<double>::infinity());
    std::vector<double> rev_d(n, std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(warped[i].real()) || !std::isfinite(warped[i].imag())) continue;
      for (int j = 0; j < n; ++j) {
        const double d = std::abs(warped[i] - z[j]);
        if (d < fwd_d[i]) {
          fwd_d[i] = d;
          fwd[i] = j;
        }
        if (d < rev_d[j]) {
          rev_d[j] = d;
          rev[j] = i;
        }
      }
    }
    std::map<std::pair<int, int>, double> uniq;
    for (int i = 0; i < n; ++i) {
      const int j = fwd[i];
      if (j < 0 || rev[j] != i) continue;
      if (i == j) continue;  // self-pairs carry no symmetry information
      if (fwd_d[i] > eps) continue;
      // near-identity transforms pair clustered neighbors; such pairs carry
      // no symmetry evidence, so only well-separated pairs count as votes
      if (std::abs(z[i] - z[j]) < 0.25) continue;
      const auto key = std::minmax(i, j);
      uniq.emplace(std::pair{key.first, key.second}, fwd_d[i]);
    }
    if (uniq.size() < 4) continue;

    Trial tr;
    // extrinsic verification: a real mirror pairing has near-parallel pair
    // directions and coplanar midpoints; sphere-only coincidences do not
    if (world != nullptr) {
      std::vector<Eigen::Vector3d> dirs, mids;
      for (const auto& [k, d] : uniq) {
        dirs.push_back(((*world)[k.second] - (*world)[k.first]).normalized());
        mids.push_back(0.5 * ((*world)[k.first] + (*world)[k.second]));
      }
      double coh = 0.0;
      int m = 0;
      for (std::size_t a = 0; a < dirs.size(); ++a)
        for (std::size_t b = a + 1; b < dirs.size(); ++b) {
          coh += std::abs(dirs[a].dot(dirs[b]));
          ++m;
        }
      if (m > 0 && coh / m < 0.9) continue;
      Eigen::Vector3d axis = dirs[0];
      Eigen::Vector3d nrm = Eigen::Vector3d::Zero();
      for (const auto& d : dirs) nrm += d.dot(axis) >= 0.0 ? d : Eigen::Vector3d(-d);
      nrm.normalize();
      Eigen::Vector3d mc = Eigen::Vector3d::Zero();
      for (const auto& p : mids) mc += p;
      mc /= static_cast<double>(mids.size());
      double span = 0.0;
      for (const auto& p : *world) span = std::max(span, (p - mc).norm());
      double rmsd = 0.0;
      for (const auto& p : mids) rmsd += std::pow((p - mc).dot(nrm), 2);
      rmsd = std::sqrt(rmsd / mids.size());
      if (span > 0.0 && rmsd > 0.08 * span) continue;

      // decisive check: the implied plane must mirror the whole candidate
      // set onto itself, not just the inlier pairs
      const double tol = 0.15 * span;
      int hits = 0;
      for (const auto& p : *world) {
        const Eigen::Vector3d r = p - 2.0 * (p - mc).dot(nrm) * nrm;
        double bestd = std::numeric_limits<double>::infinity();
        for (const auto& q : *world) bestd = std::min(bestd, (q - r).norm());
        if (bestd <= tol) ++hits;
      }
      if (hits < static_cast<int>(0.45 * world->size())) continue;
      tr.normal = nrm;
      tr.center = mc;
      tr.hits = hits;
    }

    tr.transform = h;
    tr.meandist = 0.0;
    for (const auto& [k, d] : uniq) {
      tr.meandist += d;
      tr.pairs.emplace_back(k, d);
    }
    tr.meandist /= static_cast<double>(uniq.size());
    passed.push_back(std::move(tr));
  }
  if (passed.empty()) throw std::runtime_error("mobius_vote: no trial achieved 4 inlier pairs");

  // winning trial: strongest whole-set mirror consistency, then inlier
  // count, then pairing tightness
  const Trial* best = &passed.front();
  for (const Trial& t : passed) {
    if (t.hits > best->hits ||
        (t.hits == best->hits && (t.pairs.size() > best->pairs.size() ||
                                  (t.pairs.size() == best->pairs.size() &&
                                   t.meandist < best->meandist))))
      best = &t;
  }

  // accumulate support only over trials agreeing with the winning mirror;
  // pairs recurring across agreeing trials dominate coincidences
  double span = 1.0;
  if (world != nullptr)
    for (const auto& p : *world) span = std::max(span, (p - best->center).norm());
  Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(n, n);
  for (const Trial& t : passed) {
    if (world != nullptr) {
      if (std::abs(t.normal.dot(best->normal)) < std::cos(15.0 * M_PI / 180.0)) continue;
      if (std::abs((t.center - best->center).dot(best->normal)) > 0.05 * span) continue;
    }
    for (const auto& [k, d] : t.pairs) votes(k.first, k.second) += 1.0 - d / eps;
  }

  VoteResult res;
  res.transform = best->transform;
  res.inliers = static_cast<int>(best->pairs.size());
  const double top = votes.maxCoeff();
  if (top <= 0.0) throw std::runtime_error("mobius_vote: no trial achieved 4 inlier pairs");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (votes(i, j) < 0.02 * top) continue;  // support floor
      Correspondence c;
      c.p = i;
      c.q = j;
      c.score = votes(i, j) / top;
      res.correspondences.pairs.push_back(c);
    }
  if (res.correspondences.size() < 4)
    throw std::runtime_error("mobius_vote: no trial achieved 4 inlier pairs");
  return res;
}

VoteResult mobius_vote(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& sphere,
                       const std::vector<int>& candidates, int trials, std::uint64_t seed,
                       const ScalarField* agd_field) {
  if (candidates.size() < 3) throw std::invalid_argument("mobius_vote: need >= 3 candidates");
  if (sphere.size() != mesh.vertices.size())
    throw std::invalid_argument("mobius_vote: sphere map not aligned with mesh");
  const int n = static_cast<int>(candidates.size());

  // rotate the candidate mass toward the south pole so no candidate projects
  // near infinity
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int i : candidates) mean += sphere[i];
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  if (mean.norm() > 1e-9) {
    rot = Eigen::Quaterniond::FromTwoVectors(mean.normalized(), Eigen::Vector3d(0, 0, -1))
              .toRotationMatrix();
  }
  std::vector<std::complex<double>> z(n);
  for (int i = 0; i < n; ++i) z[i] = stereographic((rot * sphere[candidates[i]]).normalized());

  // canonical scaling: centroid to 0, RMS radius to 1
  std::complex<double> centroid = 0.0;
  for (const auto& v : z) centroid += v;
  centroid /= static_cast<double>(n);
  double rms = 0.0;
  for (auto& v : z) {
    v -= centroid;
    rms += std::norm(v);
  }
  rms = std::sqrt(rms / n);
  if (rms > 1e-12)
    for (auto& v : z) v /= rms;

  // admissible images: candidates with similar symmetry-invariant value
  ScalarField phi_store;
  const ScalarField* phi = agd_field;
  if (phi == nullptr) {
    phi_store = agd(mesh);
    phi = &phi_store;
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i : candidates) {
    lo = std::min(lo, (*phi)[i]);
    hi = std::max(hi, (*phi)[i]);
  }
  const double band = 0.08 * std::max(hi - lo, 1e-12);
  std::vector<std::vector<int>> partners(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (j != i && std::abs((*phi)[candidates[i]] - (*phi)[candidates[j]]) <= band)
        partners[i].push_back(j);
    if (partners[i].size() < 3) {
      std::vector<int> order;
      for (int j = 0; j < n; ++j)
        if (j != i) order.push_back(j);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs((*phi)[candidates[i]] - (*phi)[candidates[a]]) <
               std::abs((*phi)[candidates[i]] - (*phi)[candidates[b]]);
      });
      partners[i].assign(order.begin(), order.begin() + std::min<std::size_t>(5, order.size()));
      std::sort(partners[i].begin(), partners[i].end());
    }
  }

  std::vector<Eigen::Vector3d> world(n);
  for (int i = 0; i < n; ++i) world[i] = mesh.vertices[candidates[i]];
  VoteResult res = vote_on_plane(z, partners, trials, seed, kVoteTolerance, &world);
  for (auto& c : res.correspondences.pairs) {
    c.p = candidates[c.p];
    c.q = candidates[c.q];
    c.pos_p = mesh.vertices[c.p];
    c.pos_q = mesh.vertices[c.q];
    c.midpoint = 0.5 * (c.pos_p + c.pos_q);
    c.direction = (c.pos_q - c.pos_p).normalized();
  }
  return res;
}

}  // namespace symplane
