#include "symplane/phantom.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace symplane {

void PhantomSpec::validate() const {
  if (dims.minCoeff() <= 1) throw std::invalid_argument("phantom: degenerate grid");
  if (spacing.minCoeff() <= 0.0) throw std::invalid_argument("phantom: non-positive spacing");
  if (dislocation_fraction < 0.0 || dislocation_fraction > 0.3)
    throw std::invalid_argument("phantom: dislocation_fraction must be in [0, 0.3]");
  if (noise_fraction < 0.0 || noise_fraction > 0.4)
    throw std::invalid_argument("phantom: noise_fraction must be in [0, 0.4]");
}

namespace {

struct Capsule {
  Eigen::Vector3d a, b;
  double radius;
};

/// Shape parameters in plane-local coordinates (a = |u| lateral, v, w), mm.
struct Anatomy {
  double R;  // reference half-extent

  Eigen::Vector3d tissue_radii;
  Eigen::Vector3d sacrum_center, sacrum_radii;
  Eigen::Vector3d wing_center, wing_radii;
  double wing_inner;  // inner squared-radius threshold of the shell
  double wing_cap;    // solid toward the midline below this lateral coordinate
  std::vector<Capsule> tubes;
  Eigen::Vector3d ball_center;
  double ball_radius;

  // landmark anchors (local, + side)
  Eigen::Vector3d l1, l2, l3, l4;
};

Anatomy build_anatomy(double R, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jit(-0.06, 0.06);
  auto j = [&]() { return 1.0 + jit(rng); };

  Anatomy an;
  an.R = R;
  an.tissue_radii = Eigen::Vector3d(0.88, 0.82, 0.92) * R;

  an.sacrum_center = Eigen::Vector3d(0.0, -0.25 * j(), 0.22 * j()) * R;
  an.sacrum_radii = Eigen::Vector3d(0.30 * j(), 0.16 * j(), 0.26 * j()) * R;

  an.wing_center = Eigen::Vector3d(0.40 * j(), -0.12 * j(), 0.30 * j()) * R;
  an.wing_radii = Eigen::Vector3d(0.16 * j(), 0.26 * j(), 0.30 * j()) * R;
  an.wing_inner = 0.45;
  an.wing_cap = 0.28 * R;

  const Eigen::Vector3d A(0.40 * R, -0.12 * R, 0.05 * R);   // wing, posterior
  const Eigen::Vector3d A2(0.40 * R, -0.02 * R, 0.10 * R);  // wing, anterior
  const Eigen::Vector3d B(0.38 * R * j(), 0.02 * R, -0.38 * R * j());  // ischium
  const Eigen::Vector3d P(0.04 * R, 0.42 * R * j(), -0.26 * R * j());  // pubis
  const Eigen::Vector3d P2(0.04 * R, P.y() - 0.05 * R, P.z() - 0.09 * R);
  const Eigen::Vector3d S(0.0, P.y(), P.z());  // symphysis, on the plane
  const double rt = 0.06 * R;
  an.tubes = {{A, B, rt}, {A2, P, rt}, {P2, B, rt}, {S, P, rt}};

  an.ball_center = Eigen::Vector3d(0.30 * R, 0.28 * R, -0.10 * R);
  an.ball_radius = 0.10 * R * j();

  an.l1 = an.wing_center + Eigen::Vector3d(0.0, 0.0, an.wing_radii.z());
  an.l2 = an.wing_center + Eigen::Vector3d(0.0, -an.wing_radii.y(), 0.0);
  an.l3 = B;
  an.l4 = P2;
  return an;
}

double capsule_distance(const Eigen::Vector3d& p, const Capsule& c) {
  const Eigen::Vector3d d = c.b - c.a;
  const double t = std::clamp((p - c.a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (p - (c.a + t * d)).norm();
}

/// Intensity at plane-local coordinates; symmetric in u by construction.
float anatomy_value(const Anatomy& an, double u, double v, double w) {
  const Eigen::Vector3d p(std::abs(u), v, w);

  // interior depth of the strongest bone structure, in [0,1]
  double t = -1.0;

  {  // sacral bar
    const Eigen::Vector3d q = (p - an.sacrum_center).cwiseQuotient(an.sacrum_radii);
    const double rho = q.norm();
    if (rho <= 1.0) t = std::max(t, 1.0 - rho);
  }
  {  // iliac wing shell with a solid cap toward the midline
    const Eigen::Vector3d q = (p - an.wing_center).cwiseQuotient(an.wing_radii);
    const double rho2 = q.squaredNorm();
    if (rho2 <= 1.0) {
      if (p.x() <= an.wing_cap) {
        t = std::max(t, 1.0 - std::sqrt(rho2));
      } else if (rho2 >= an.wing_inner) {
        const double mid = 0.5 * (1.0 + an.wing_inner);
        const double half = 0.5 * (1.0 - an.wing_inner);
        t = std::max(t, 1.0 - std::abs(rho2 - mid) / half);
      }
    }
  }
  for (const Capsule& c : an.tubes) {
    const double d = capsule_distance(p, c);
    if (d <= c.radius) t = std::max(t, 1.0 - d / c.radius);
  }
  {  // femoral-head ball
    const double d = (p - an.ball_center).norm();
    if (d <= an.ball_radius) t = std::max(t, 1.0 - d / an.ball_radius);
  }

  if (t >= 0.0) {
    const double val = kBoneMinValue + (kBoneMaxValue - kBoneMinValue) * std::clamp(t, 0.0, 1.0);
    return static_cast<float>(val);
  }

  const Eigen::Vector3d q = p.cwiseQuotient(an.tissue_radii);
  if (q.squaredNorm() <= 1.0) return kSoftTissueValue;
  return kAirValue;
}

}  // namespace

Volume apply_dislocation(const Volume& v, const BinaryMask& fragment,
                         const Eigen::Isometry3d& motion) {
  if (fragment.dims != v.dims) throw std::invalid_argument("apply_dislocation: grid mismatch");
  const Eigen::Vector3d lo = v.origin;
  const Eigen::Vector3d hi =
      v.origin + (v.dims.cast<double>() - Eigen::Vector3d::Ones()).cwiseProduct(v.spacing);

  // destination bounding box in index space, and the outside-grid check
  Eigen::Vector3d bb_lo = hi, bb_hi = lo;
  bool any = false;
  for (int k = 0; k < v.dims.z(); ++k)
    for (int j = 0; j < v.dims.y(); ++j)
      for (int i = 0; i < v.dims.x(); ++i) {
        if (!fragment.get(i, j, k)) continue;
        any = true;
        const Eigen::Vector3d q = motion * world_from_index(v, {i, j, k});
        if ((q.array() < lo.array()).any() || (q.array() > hi.array()).any())
          throw std::invalid_argument("apply_dislocation: motion maps fragment outside grid");
        bb_lo = bb_lo.cwiseMin(q);
        bb_hi = bb_hi.cwiseMax(q);
      }
  if (!any) return v;

  Volume out = v;
  for (std::size_t s = 0; s < out.voxels.size(); ++s)
    if (fragment.bits[s]) out.voxels[s] = kSoftTissueValue;

  const Eigen::Isometry3d inv = motion.inverse();
  Eigen::Vector3i ilo, ihi;
  for (int a = 0; a < 3; ++a) {
    ilo[a] = std::max(0, static_cast<int>(std::floor((bb_lo[a] - v.origin[a]) / v.spacing[a])) - 1);
    ihi[a] = std::min(v.dims[a] - 1,
                      static_cast<int>(std::ceil((bb_hi[a] - v.origin[a]) / v.spacing[a])) + 1);
  }
  for (int k = ilo.z(); k <= ihi.z(); ++k)
    for (int j = ilo.y(); j <= ihi.y(); ++j)
      for (int i = ilo.x(); i <= ihi.x(); ++i) {
        const Eigen::Vector3d src = inv * world_from_index(v, {i, j, k});
        const Eigen::Vector3d g = (src - v.origin).cwiseQuotient(v.spacing);
        const Eigen::Vector3i n(static_cast<int>(std::lround(g.x())),
                                static_cast<int>(std::lround(g.y())),
                                static_cast<int>(std::lround(g.z())));
        if (!fragment.in_bounds(n.x(), n.y(), n.z())) continue;
        if (!fragment.get(n.x(), n.y(), n.z())) continue;
        out.at(i, j, k) = static_cast<float>(sample_trilinear(v, src));
      }
  return out;
}

Phantom make_phantom(const PhantomSpec& spec) {
  spec.validate();

  Phantom ph;
  Volume& vol = ph.volume;
  vol.dims = spec.dims;
  vol.spacing = spec.spacing;
  vol.origin = -0.5 * (spec.dims.cast<double>() - Eigen::Vector3d::Ones()).cwiseProduct(spec.spacing);

  SymmetryPlane plane = spec.base_plane;
  if (spec.default_plane) {
    plane.point = Eigen::Vector3d::Zero();  // grid center with the centered origin
    plane.normal = Eigen::Vector3d::UnitX();
  }
  plane.normal.normalize();
  ph.plane = plane.canonicalized();

  const Eigen::Isometry3d frame = ph.plane.frame();
  const Eigen::Vector3d n = frame.linear().col(0);
  const Eigen::Vector3d ev = frame.linear().col(1);
  const Eigen::Vector3d ew = frame.linear().col(2);

  const Eigen::Vector3d half =
      0.5 * (spec.dims.cast<double>() - Eigen::Vector3d::Ones()).cwiseProduct(spec.spacing);
  const double R = half.minCoeff();
  const Anatomy an = build_anatomy(R, spec.structure_seed);

  vol.voxels.resize(static_cast<std::size_t>(spec.dims.x()) * spec.dims.y() * spec.dims.z());
  for (int k = 0; k < spec.dims.z(); ++k)
    for (int j = 0; j < spec.dims.y(); ++j)
      for (int i = 0; i < spec.dims.x(); ++i) {
        const Eigen::Vector3d p = world_from_index(vol, {i, j, k}) - ph.plane.point;
        vol.at(i, j, k) = anatomy_value(an, n.dot(p), ev.dot(p), ew.dot(p));
      }

  auto to_world = [&](const Eigen::Vector3d& local, double sign) {
    return ph.plane.point + sign * local.x() * n + local.y() * ev + local.z() * ew;
  };
  const Eigen::Vector3d anchors[4] = {an.l1, an.l2, an.l3, an.l4};
  const char* names[4] = {"L1", "L2", "L3", "L4"};
  for (int l = 0; l < 4; ++l)
    ph.landmarks.push_back({names[l], to_world(anchors[l], +1.0), to_world(anchors[l], -1.0)});

  ph.fragment = BinaryMask::like(vol);
  if (spec.dislocation_fraction > 0.0) {
    Eigen::Vector3d site_local;
    switch (spec.site) {
      case FractureSite::IliacWing:
        site_local = an.wing_center + Eigen::Vector3d(0.0, 0.0, 0.15 * R);
        break;
      case FractureSite::PelvicRing:
        site_local = an.tubes[1].b;  // pubis
        break;
      case FractureSite::VerticalShear:
        site_local = 0.5 * (an.tubes[0].a + an.tubes[0].b);  // posterior column
        break;
    }
    const Eigen::Vector3d center = to_world(site_local, +1.0);
    const double umin = 0.5 * spec.spacing.minCoeff();

    // fraction counts against the body (non-air voxels): fragments live
    // inside the patient, not in the surrounding air
    std::size_t body_total = 0;
    for (float value : vol.voxels)
      if (value > kAirValue + 1.0f) ++body_total;
    const double target = spec.dislocation_fraction * static_cast<double>(body_total);

    auto eligible = [&](int i, int j, int k) {
      if (vol.at(i, j, k) <= kAirValue + 1.0f) return false;
      const Eigen::Vector3d p = world_from_index(vol, {i, j, k});
      return ph.plane.signed_distance(p) >= umin;
    };
    auto count_for = [&](double r) {
      std::size_t cnt = 0;
      for (int k = 0; k < spec.dims.z(); ++k)
        for (int j = 0; j < spec.dims.y(); ++j)
          for (int i = 0; i < spec.dims.x(); ++i) {
            if (!eligible(i, j, k)) continue;
            if ((world_from_index(vol, {i, j, k}) - center).norm() <= r) ++cnt;
          }
      return static_cast<double>(cnt);
    };
    double rlo = spec.spacing.minCoeff(), rhi = 4.0 * R;
    for (int it = 0; it < 48; ++it) {
      const double rm = 0.5 * (rlo + rhi);
      (count_for(rm) < target ? rlo : rhi) = rm;
    }
    const double r = 0.5 * (rlo + rhi);
    for (int k = 0; k < spec.dims.z(); ++k)
      for (int j = 0; j < spec.dims.y(); ++j)
        for (int i = 0; i < spec.dims.x(); ++i) {
          if (!eligible(i, j, k)) continue;
          if ((world_from_index(vol, {i, j, k}) - center).norm() <= r)
            ph.fragment.set(i, j, k, true);
        }

    ph.has_fragment = true;
    if (!spec.default_motion) {
      ph.motion = spec.dislocation_motion;
      ph.volume = apply_dislocation(vol, ph.fragment, ph.motion);
    } else {
      // rotate about the fragment center and slide inward, staying in the
      // body; shrink the motion if a large fragment would leave the grid
      Eigen::Vector3d dir = -center;
      if (dir.norm() < 1e-9) dir = -n;
      dir.normalize();
      double scale = 1.0;
      for (int attempt = 0;; ++attempt) {
        Eigen::Isometry3d motion = Eigen::Isometry3d::Identity();
        motion.translate(center + scale * 6.0 * dir);
        motion.rotate(Eigen::AngleAxisd(scale * 8.0 * M_PI / 180.0, ew));
        motion.translate(-center);
        try {
          ph.volume = apply_dislocation(vol, ph.fragment, motion);
          ph.motion = motion;
          break;
        } catch (const std::invalid_argument&) {
          if (attempt >= 8) throw;
          scale *= 0.7;
        }
      }
    }
  }

  if (spec.noise_fraction > 0.0) {
    const std::uint64_t noise_seed = spec.structure_seed ^ 0xDA3E39CB94B95BDBULL;
    ph.volume = add_gaussian_noise(ph.volume, spec.noise_fraction, noise_seed);
  }
  return ph;
}

void save_sidecar(const SymmetryPlane& plane, const LandmarkSet& landmarks,
                  const std::string& path) {
  nlohmann::json j;
  j["point_mm"] = {plane.point.x(), plane.point.y(), plane.point.z()};
  j["normal"] = {plane.normal.x(), plane.normal.y(), plane.normal.z()};
  nlohmann::json lm = nlohmann::json::object();
  for (const Landmark& l : landmarks) {
    lm[l.name] = {
        {"positive_mm", {l.positive_side.x(), l.positive_side.y(), l.positive_side.z()}},
        {"negative_mm", {l.negative_side.x(), l.negative_side.y(), l.negative_side.z()}}};
  }
  j["landmarks"] = lm;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_sidecar: cannot open " + path);
  f << j.dump(2) << "\n";
}

std::pair<SymmetryPlane, LandmarkSet> load_sidecar(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_sidecar: cannot open " + path);
  nlohmann::json j;
  f >> j;
  SymmetryPlane plane;
  for (int a = 0; a < 3; ++a) {
    plane.point[a] = j.at("point_mm").at(a).get<double>();
    plane.normal[a] = j.at("normal").at(a).get<double>();
  }
  plane.normal.normalize();
  LandmarkSet lms;
  if (j.contains("landmarks")) {
    for (auto& [name, val] : j.at("landmarks").items()) {
      Landmark l;
      l.name = name;
      for (int a = 0; a < 3; ++a) {
        l.positive_side[a] = val.at("positive_mm").at(a).get<double>();
        l.negative_side[a] = val.at("negative_mm").at(a).get<double>();
      }
      lms.push_back(l);
    }
    std::sort(lms.begin(), lms.end(),
              [](const Landmark& a, const Landmark& b) { return a.name < b.name; });
  }
  return {plane, lms};
}

}  // namespace symplane
