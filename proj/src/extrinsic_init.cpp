#include "symplane/extrinsic_init.hpp"

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace symplane {

void RansacConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("ransac: iterations must be >= 1");
  if (angle_tol <= 0.0 || dist_tol <= 0.0)
    throw std::invalid_argument("ransac: tolerances must be positive");
}

namespace {

double direction_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::acos(std::clamp(std::abs(a.dot(b)), 0.0, 1.0));
}

Eigen::Vector3d consensus_direction(const CorrespondenceSet& cs) {
  // sign-align to the first pair before averaging
  const Eigen::Vector3d ref = cs.pairs.front().direction;
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (const auto& c : cs.pairs) acc += (c.direction.dot(ref) >= 0.0 ? 1.0 : -1.0) * c.direction;
  return acc.normalized();
}

}  // namespace

CorrespondenceSet ransac_directions(const CorrespondenceSet& cs, const RansacConfig& cfg) {
  cfg.validate();
  if (cs.size() < 2) throw std::invalid_argument("ransac_directions: need >= 2 pairs");
  const int n = static_cast<int>(cs.size());
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  auto select = [&](const Eigen::Vector3d& hyp) {
    std::vector<int> inl;
    for (int i = 0; i < n; ++i)
      if (direction_angle(hyp, cs.pairs[i].direction) <= cfg.angle_tol) inl.push_back(i);
    return inl;
  };
  std::vector<int> best;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<int> inl = select(cs.pairs[pick(rng)].direction);
    if (inl.size() > best.size()) best = std::move(inl);
  }
  if (static_cast<int>(best.size()) < cfg.min_inliers)
    throw std::runtime_error("ransac_directions: consensus below min_inliers");
  // local refinement: recenter the hypothesis on the consensus mean so the
  // inlier set tightens around the dominant direction cluster
  for (int r = 0; r < 10; ++r) {
    const Eigen::Vector3d ref = cs.pairs[best.front()].direction;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int i : best)
      mean += (cs.pairs[i].direction.dot(ref) >= 0.0 ? 1.0 : -1.0) * cs.pairs[i].direction;
    mean.normalize();
    std::vector<int> inl = select(mean);
    if (static_cast<int>(inl.size()) < cfg.min_inliers || inl == best) break;
    best = std::move(inl);
  }
  CorrespondenceSet out;
  for (int i : best) out.pairs.push_back(cs.pairs[i]);
  return out;
}

CorrespondenceSet ransac_midpoints(const CorrespondenceSet& cs, const RansacConfig& cfg) {
  cfg.validate();
  if (cs.size() < 3) throw std::invalid_argument("ransac_midpoints: need >= 3 pairs");
  const int n = static_cast<int>(cs.size());
  const Eigen::Vector3d dir = consensus_direction(cs);
  std::mt19937_64 rng(cfg.seed + 1);
  std::uniform_int_distribution<int> pick(0, n - 1);

  std::vector<int> best;
  for (int it = 0; it < cfg.iterations; ++it) {
    int a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) continue;
    const Eigen::Vector3d& pa = cs.pairs[a].midpoint;
    const Eigen::Vector3d normal_raw =
        (cs.pairs[b].midpoint - pa).cross(cs.pairs[c].midpoint - pa);
    if (normal_raw.norm() < 1e-9) continue;  // collinear sample
    const Eigen::Vector3d normal = normal_raw.normalized();
    // quantized midpoints make 3-point normals noisy; allow a looser
    // coherence band than the stage-1 direction tolerance
    if (direction_angle(normal, dir) > 3.0 * cfg.angle_tol) continue;
    std::vector<int> inl;
    for (int i = 0; i < n; ++i)
      if (std::abs(normal.dot(cs.pairs[i].midpoint - pa)) <= cfg.dist_tol) inl.push_back(i);
    if (inl.size() > best.size()) best = std::move(inl);
  }
  if (static_cast<int>(best.size()) < cfg.min_inliers)
    throw std::runtime_error("ransac_midpoints: consensus below min_inliers");
  // local refinement: refit the plane to the consensus midpoints and
  // re-select, tightening around the dominant coplanar cluster
  for (int r = 0; r < 10; ++r) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int i : best) mean += cs.pairs[i].midpoint;
    mean /= static_cast<double>(best.size());
    Eigen::MatrixXd P(best.size(), 3);
    for (std::size_t k = 0; k < best.size(); ++k)
      P.row(k) = (cs.pairs[best[k]].midpoint - mean).transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(P, Eigen::ComputeThinV);
    const Eigen::Vector3d normal = svd.matrixV().col(2).normalized();
    if (direction_angle(normal, dir) > 3.0 * cfg.angle_tol) break;
    std::vector<int> inl;
    for (int i = 0; i < n; ++i)
      if (std::abs(normal.dot(cs.pairs[i].midpoint - mean)) <= cfg.dist_tol) inl.push_back(i);
    if (static_cast<int>(inl.size()) < cfg.min_inliers || inl == best) break;
    best = std::move(inl);
  }
  CorrespondenceSet out;
  for (int i : best) out.pairs.push_back(cs.pairs[i]);
  return out;
}

SymmetryPlane fit_plane_svd(const CorrespondenceSet& cs) {
  if (cs.size() < 3) throw std::invalid_argument("fit_plane_svd: need >= 3 midpoints");
  const int n = static_cast<int>(cs.size());
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& c : cs.pairs) mean += c.midpoint;
  mean /= n;
  Eigen::MatrixXd P(n, 3);
  for (int i = 0; i < n; ++i) P.row(i) = (cs.pairs[i].midpoint - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(P, Eigen::ComputeThinV);
  if (svd.rank() < 2 || svd.singularValues()(1) < 1e-9)
    throw std::invalid_argument("fit_plane_svd: collinear midpoints");
  SymmetryPlane plane;
  plane.normal = svd.matrixV().col(2).normalized();
  plane.point = mean;
  return plane.canonicalized();
}

InitResult initialize(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& sphere,
                      const std::vector<int>& candidates, const RansacConfig& cfg, int trials,
                      const ScalarField* agd_field) {
  const VoteResult vote = mobius_vote(mesh, sphere, candidates, trials, cfg.seed, agd_field);
  InitResult res;
  res.initial_pairs = static_cast<int>(vote.correspondences.size());
  const CorrespondenceSet stage1 = ransac_directions(vote.correspondences, cfg);
  res.ransac1_inliers = static_cast<int>(stage1.size());
  const CorrespondenceSet stage2 = ransac_midpoints(stage1, cfg);
  res.ransac2_inliers = static_cast<int>(stage2.size());
  res.plane = fit_plane_svd(stage2);
  // The midpoint scatter can be nearly collinear, leaving the SVD normal
  // ill-conditioned in-plane; the pair directions always estimate the
  // normal directly, so fall back to them when the two disagree.
  const Eigen::Vector3d dir = consensus_direction(stage2);
  if (std::abs(dir.dot(res.plane.normal)) < std::cos(cfg.angle_tol)) {
    res.plane.normal = dir;
    res.plane = res.plane.canonicalized();
  }
  res.inliers = stage2;
  return res;
}

void save_plane_json(const SymmetryPlane& plane, const std::string& path,
                     const InitResult* stages) {
  nlohmann::json j;
  j["point_mm"] = {plane.point.x(), plane.point.y(), plane.point.z()};
  j["normal"] = {plane.normal.x(), plane.normal.y(), plane.normal.z()};
  if (stages != nullptr)
    j["stage_counts"] = {stages->initial_pairs, stages->ransac1_inliers, stages->ransac2_inliers};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_plane_json: cannot open " + path);
  f << j.dump(2) << "\n";
}

SymmetryPlane load_plane_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_plane_json: cannot open " + path);
  nlohmann::json j;
  f >> j;
  SymmetryPlane plane;
  for (int a = 0; a < 3; ++a) {
    plane.point[a] = j.at("point_mm").at(a).get<double>();
    plane.normal[a] = j.at("normal").at(a).get<double>();
  }
  plane.normal.normalize();
  return plane;
}

void save_correspondences_json(const CorrespondenceSet& cs, const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cs.pairs) {
    arr.push_back({{"p_mm", {c.pos_p.x(), c.pos_p.y(), c.pos_p.z()}},
                   {"p_prime_mm", {c.pos_q.x(), c.pos_q.y(), c.pos_q.z()}},
                   {"midpoint_mm", {c.midpoint.x(), c.midpoint.y(), c.midpoint.z()}},
                   {"direction", {c.direction.x(), c.direction.y(), c.direction.z()}},
                   {"score", c.score}});
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_correspondences_json: cannot open " + path);
  f << arr.dump(2) << "\n";
}

}  // namespace symplane
