#include "symplane/augment.hpp"

#include "symplane/optim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace symplane {

void CameraModel::validate() const {
  if (sdd_mm <= 0.0) throw std::invalid_argument("camera: sdd_mm must be positive");
  if (pixel_spacing_mm <= 0.0) throw std::invalid_argument("camera: pixel spacing must be positive");
  if (dims_px.x() < 1 || dims_px.y() < 1)
    throw std::invalid_argument("camera: image dims must be positive");
  if ((R * R.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-9)
    throw std::invalid_argument("camera: R must be orthonormal");
}

Eigen::Vector3d CameraModel::ray_direction(double u, double v) const {
  const Eigen::Vector3d detector_cam{(u - principal_point_px.x()) * pixel_spacing_mm,
                                     (v - principal_point_px.y()) * pixel_spacing_mm, sdd_mm};
  return (R.transpose() * detector_cam).normalized();
}

void save_camera_json(const CameraModel& cam, const std::string& path) {
  nlohmann::json j;
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[3 * i + k] = cam.R(i, k);
  j["R"] = r;
  j["t_mm"] = {cam.t.x(), cam.t.y(), cam.t.z()};
  j["sdd_mm"] = cam.sdd_mm;
  j["pixel_spacing_mm"] = cam.pixel_spacing_mm;
  j["principal_point_px"] = {cam.principal_point_px.x(), cam.principal_point_px.y()};
  j["dims_px"] = {cam.dims_px.x(), cam.dims_px.y()};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_camera_json: cannot open " + path);
  f << j.dump(2) << "\n";
}

CameraModel load_camera_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_camera_json: cannot open " + path);
  nlohmann::json j;
  f >> j;
  CameraModel cam;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) cam.R(i, k) = j.at("R").at(3 * i + k).get<double>();
  for (int a = 0; a < 3; ++a) cam.t[a] = j.at("t_mm").at(a).get<double>();
  cam.sdd_mm = j.at("sdd_mm").get<double>();
  cam.pixel_spacing_mm = j.at("pixel_spacing_mm").get<double>();
  for (int a = 0; a < 2; ++a) {
    cam.principal_point_px[a] = j.at("principal_point_px").at(a).get<double>();
    cam.dims_px[a] = j.at("dims_px").at(a).get<int>();
  }
  cam.validate();
  return cam;
}

Image2D Image2D::zeros(int w, int h) {
  Image2D img;
  img.width = w;
  img.height = h;
  img.pixels.assign(static_cast<std::size_t>(w) * h, 0.0f);
  return img;
}

ImageRGB ImageRGB::zeros(int w, int h) {
  ImageRGB img;
  img.width = w;
  img.height = h;
  img.pixels.assign(3 * static_cast<std::size_t>(w) * h, 0.0f);
  return img;
}

void save_pgm(const Image2D& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_pgm: cannot open " + path);
  float maxv = 0.0f;
  for (float p : img.pixels) maxv = std::max(maxv, p);
  const double scale = maxv > 0.0f ? 65535.0 / maxv : 0.0;
  f << "P5\n# max " << maxv << "\n" << img.width << " " << img.height << "\n65535\n";
  for (float p : img.pixels) {
    const auto q = static_cast<std::uint16_t>(std::clamp(p * scale, 0.0, 65535.0));
    const unsigned char bytes[2] = {static_cast<unsigned char>(q >> 8),
                                    static_cast<unsigned char>(q & 0xff)};
    f.write(reinterpret_cast<const char*>(bytes), 2);
  }
}

Image2D load_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_pgm: cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw std::runtime_error("load_pgm: not a binary PGM: " + path);
  double maxv = 1.0;
  auto next_token = [&]() {
    std::string tok;
    while (f >> tok) {
      if (tok[0] == '#') {
        if (tok == "#") {
          std::string rest;
          f >> rest;
          if (rest == "max") f >> maxv;
        }
        std::string line;
        std::getline(f, line);
        continue;
      }
      return tok;
    }
    throw std::runtime_error("load_pgm: truncated header: " + path);
  };
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int depth = std::stoi(next_token());
  if (depth != 65535) throw std::runtime_error("load_pgm: expected 16-bit depth: " + path);
  f.get();  // single whitespace after the header
  Image2D img = Image2D::zeros(w, h);
  std::vector<unsigned char> raw(2 * img.pixels.size());
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw std::runtime_error("load_pgm: truncated payload: " + path);
  const double scale = maxv / 65535.0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const unsigned q = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    img.pixels[i] = static_cast<float>(q * scale);
  }
  return img;
}

void save_ppm(const ImageRGB& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_ppm: cannot open " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  for (float p : img.pixels) {
    const auto q = static_cast<unsigned char>(std::clamp(p, 0.0f, 1.0f) * 255.0f + 0.5f);
    f.write(reinterpret_cast<const char*>(&q), 1);
  }
}

Volume mirror_template(const Volume& v, const SymmetryPlane& plane, int healthy_side) {
  v.validate();
  if (healthy_side != 1 && healthy_side != -1)
    throw std::invalid_argument("mirror_template: healthy_side must be +1 or -1");
  // the plane must separate at least one pair of bounding-box corners
  bool pos = false, neg = false;
  for (int c = 0; c < 8; ++c) {
    Eigen::Vector3d corner = v.origin;
    for (int a = 0; a < 3; ++a)
      if (c & (1 << a)) corner[a] += (v.dims[a] - 1) * v.spacing[a];
    const double s = plane.signed_distance(corner);
    pos = pos || s >= 0.0;
    neg = neg || s <= 0.0;
  }
  if (!pos || !neg) throw std::invalid_argument("mirror_template: plane misses the volume");

  const ReflectionMap m = reflection_from_plane(plane);
  Volume out = v;
  for (int k = 0; k < v.dims.z(); ++k)
    for (int j = 0; j < v.dims.y(); ++j)
      for (int i = 0; i < v.dims.x(); ++i) {
        const Eigen::Vector3d p = world_from_index(v, {i, j, k});
        if (healthy_side * plane.signed_distance(p) < 0.0)
          out.at(i, j, k) = static_cast<float>(sample_trilinear(v, m.apply(p)));
      }
  return out;
}

double attenuation_from_hu(double hu) {
  constexpr double mu_water = 0.02;  // per mm
  return std::max(0.0, (hu + 1000.0) / 1000.0) * mu_water;
}

namespace {

/// Intersection of a ray with the trilinear-valid box (voxel-center bounds);
/// returns false when the ray misses.
bool ray_box(const Volume& v, const Eigen::Vector3d& o, const Eigen::Vector3d& d, double& t0,
             double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = v.origin[a];
    const double hi = v.origin[a] + (v.dims[a] - 1) * v.spacing[a];
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < lo || o[a] > hi) return false;
      continue;
    }
    double ta = (lo - o[a]) / d[a];
    double tb = (hi - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 < t1;
}

/// Integrates field values (mapped through `weight`) along every camera ray.
template <typename WeightFn>
Image2D integrate_rays(const Volume& v, const CameraModel& cam, WeightFn weight) {
  cam.validate();
  v.validate();
  Image2D img = Image2D::zeros(cam.dims_px.x(), cam.dims_px.y());
  const Eigen::Vector3d src = cam.source_world();
  const double step = v.spacing.minCoeff() / 2.0;
  for (int py = 0; py < img.height; ++py)
    for (int px = 0; px < img.width; ++px) {
      const Eigen::Vector3d dir = cam.ray_direction(px, py);
      double t0, t1;
      if (!ray_box(v, src, dir, t0, t1)) continue;
      double acc = 0.0;
      const int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step)));
      const double dt = (t1 - t0) / n;
      for (int s = 0; s < n; ++s) {
        const Eigen::Vector3d p = src + (t0 + (s + 0.5) * dt) * dir;
        acc += weight(sample_trilinear(v, p)) * dt;
      }
      img.at(px, py) = static_cast<float>(acc);
    }
  return img;
}

Volume gradient_magnitude(const Volume& v) {
  Volume g = v;
  for (int k = 0; k < v.dims.z(); ++k)
    for (int j = 0; j < v.dims.y(); ++j)
      for (int i = 0; i < v.dims.x(); ++i) {
        Eigen::Vector3d grad = Eigen::Vector3d::Zero();
        const int idx[3] = {i, j, k};
        for (int a = 0; a < 3; ++a) {
          int lo[3] = {i, j, k}, hi[3] = {i, j, k};
          lo[a] = std::max(0, idx[a] - 1);
          hi[a] = std::min(v.dims[a] - 1, idx[a] + 1);
          const double span = (hi[a] - lo[a]) * v.spacing[a];
          if (span > 0.0)
            grad[a] = (v.at(hi[0], hi[1], hi[2]) - v.at(lo[0], lo[1], lo[2])) / span;
        }
        g.at(i, j, k) = static_cast<float>(grad.norm());
      }
  return g;
}

/// Zhang-Suen thinning of a 0/1 image.
void thin_binary(Image2D& img) {
  auto px = [&](int u, int v) -> int {
    if (u < 0 || v < 0 || u >= img.width || v >= img.height) return 0;
    return img.at(u, v) > 0.5f ? 1 : 0;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<std::pair<int, int>> kill;
      for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u) {
          if (!px(u, v)) continue;
          const int p2 = px(u, v - 1), p3 = px(u + 1, v - 1), p4 = px(u + 1, v),
                    p5 = px(u + 1, v + 1), p6 = px(u, v + 1), p7 = px(u - 1, v + 1),
                    p8 = px(u - 1, v), p9 = px(u - 1, v - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;
          const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int s = 0; s < 8; ++s)
            if (seq[s] == 0 && seq[s + 1] == 1) ++a;
          if (a != 1) continue;
          if (pass == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          kill.emplace_back(u, v);
        }
      for (auto [u, v] : kill) img.at(u, v) = 0.0f;
      changed = changed || !kill.empty();
    }
  }
}

}  // namespace

Image2D drr(const Volume& v, const CameraModel& cam) {
  return integrate_rays(v, cam, attenuation_from_hu);
}

Image2D edge_contours(const Volume& v, const CameraModel& cam) {
  const Volume g = gradient_magnitude(v);
  Image2D img = integrate_rays(g, cam, [](double x) { return std::max(0.0, x); });
  std::vector<float> nonzero;
  for (float p : img.pixels)
    if (p > 0.0f) nonzero.push_back(p);
  if (nonzero.empty()) return img;  // empty volume: empty contours
  const std::size_t q = static_cast<std::size_t>(0.9 * (nonzero.size() - 1));
  std::nth_element(nonzero.begin(), nonzero.begin() + q, nonzero.end());
  const float thresh = nonzero[q];
  for (float& p : img.pixels) p = p >= thresh ? 1.0f : 0.0f;
  thin_binary(img);
  return img;
}

double ncc(const Image2D& a, const Image2D& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("ncc: dimension mismatch");
  // common support: pixels where both projections carry signal
  double sa = 0.0, sb = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    if (a.pixels[i] <= 0.0f || b.pixels[i] <= 0.0f) continue;
    sa += a.pixels[i];
    sb += b.pixels[i];
    ++n;
  }
  if (n < 16) return -1.0;
  const double ma = sa / n, mb = sb / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    if (a.pixels[i] <= 0.0f || b.pixels[i] <= 0.0f) continue;
    const double da = a.pixels[i] - ma, db = b.pixels[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va < 1e-12 || vb < 1e-12) return -1.0;
  return cov / std::sqrt(va * vb);
}

RegisterResult register_2d3d(const Image2D& xray, const Volume& v, const CameraModel& init,
                             double rot_bound, double trans_bound, int max_iter) {
  init.validate();
  if (rot_bound <= 0.0 || trans_bound <= 0.0)
    throw std::invalid_argument("register_2d3d: bounds must be positive");

  // Rotations are taken about the volume center rather than the source: a
  // camera orbit about the object (lateral source motion with a compensating
  // re-aim) is then a single coordinate instead of a coupled
  // rotation+translation move, which the separable surrogate cannot follow.
  Eigen::Vector3d center = v.origin;
  for (int a = 0; a < 3; ++a) center[a] += 0.5 * (v.dims[a] - 1) * v.spacing[a];
  auto perturbed = [&, center](const Eigen::VectorXd& x) {
    CameraModel cam = init;
    const Eigen::Matrix3d dR = (Eigen::AngleAxisd(x[2], Eigen::Vector3d::UnitZ()) *
                                Eigen::AngleAxisd(x[1], Eigen::Vector3d::UnitY()) *
                                Eigen::AngleAxisd(x[0], Eigen::Vector3d::UnitX()))
                                   .toRotationMatrix();
    cam.R = init.R * dR.transpose();
    cam.t = init.R * (center - dR.transpose() * center) + init.t +
            Eigen::Vector3d(x[3], x[4], x[5]);
    return cam;
  };
  const CostFunction f = [&](const Eigen::VectorXd& x) {
    return -ncc(xray, drr(v, perturbed(x)));
  };

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(6), lo(6), hi(6);
  lo << -rot_bound, -rot_bound, -rot_bound, -trans_bound, -trans_bound, -trans_bound;
  hi = -lo;
  const OptimResult opt = minimize_quadratic_trust_region(f, x0, lo, hi, max_iter);

  RegisterResult res;
  res.init_score = -f(x0);
  res.camera = perturbed(opt.x);
  res.score = -opt.f;
  return res;
}

ImageRGB overlay(const Image2D& xray, const Image2D& contours,
                 const std::array<float, 3>& color) {
  if (xray.width != contours.width || xray.height != contours.height)
    throw std::invalid_argument("overlay: dimension mismatch");
  float lo = std::numeric_limits<float>::max(), hi = std::numeric_limits<float>::lowest();
  for (float p : xray.pixels) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  const float scale = hi > lo ? 1.0f / (hi - lo) : 0.0f;
  ImageRGB out = ImageRGB::zeros(xray.width, xray.height);
  for (std::size_t i = 0; i < xray.pixels.size(); ++i) {
    if (contours.pixels[i] > 0.5f) {
      out.pixels[3 * i] = color[0];
      out.pixels[3 * i + 1] = color[1];
      out.pixels[3 * i + 2] = color[2];
    } else {
      const float g = (xray.pixels[i] - lo) * scale;
      out.pixels[3 * i] = out.pixels[3 * i + 1] = out.pixels[3 * i + 2] = g;
    }
  }
  return out;
}

}  // namespace symplane
