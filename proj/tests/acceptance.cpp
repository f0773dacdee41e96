// Acceptance gate: one test case per criterion, each printing a single
// PASS/FAIL line with the measured numbers. Run a single criterion with
//   symplane_acceptance --test-case='*criterion_4_*'
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "symplane/augment.hpp"
#include "symplane/experiments.hpp"
#include "symplane/extrinsic_init.hpp"
#include "symplane/metrics.hpp"
#include "symplane/phantom.hpp"
#include "symplane/pipeline.hpp"
#include "symplane/reeb.hpp"
#include "symplane/refine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <random>

using namespace symplane;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int idx, const char* name, bool ok, const std::string& details, double seconds,
            double budget_seconds) {
  const bool in_budget = seconds <= budget_seconds;
  std::printf("[criterion %2d] %s %s: %s (%.1f s / budget %.0f s)\n", idx,
              ok && in_budget ? "PASS" : "FAIL", name, details.c_str(), seconds, budget_seconds);
  std::fflush(stdout);
  CHECK(ok);
  CHECK(in_budget);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

double median_of(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (!std::isnan(x)) {
      acc += x;
      ++n;
    }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : acc / double(n);
}

std::string out_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "symplane_acceptance";
  std::filesystem::create_directories(dir);
  return dir.string();
}

SymmetryPlane random_plane(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  SymmetryPlane p;
  do {
    p.normal = Eigen::Vector3d(g(rng), g(rng), g(rng));
  } while (p.normal.norm() < 1e-6);
  p.normal.normalize();
  p.point = {u(rng), u(rng), u(rng)};
  return p;
}

}  // namespace

TEST_CASE("criterion_1_reflection_algebra") {
  Stopwatch sw;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 50.0);
  double worst_invol = 0.0, worst_iso = 0.0, worst_det = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ReflectionMap m = reflection_from_plane(random_plane(rng));
    const Eigen::Vector3d a(g(rng), g(rng), g(rng));
    const Eigen::Vector3d b(g(rng), g(rng), g(rng));
    worst_invol = std::max(worst_invol, (m.apply(m.apply(a)) - a).norm());
    worst_iso = std::max(worst_iso,
                         std::abs((m.apply(a) - m.apply(b)).norm() - (a - b).norm()));
    worst_det = std::max(worst_det,
                         std::abs(m.matrix.topLeftCorner<3, 3>().determinant() + 1.0));
  }
  const bool ok = worst_invol < 1e-9 && worst_iso < 1e-9 && worst_det < 1e-9;
  report(1, "reflection algebra", ok,
         fmt("1000 planes, worst involution %.2e, isometry %.2e, |det+1| %.2e", worst_invol,
             worst_iso, worst_det),
         sw.seconds(), 1.0);
}

TEST_CASE("criterion_2_tukey_unit") {
  Stopwatch sw;
  const double c = 4.685;
  bool ok = tukey_rho(0.0, c) == 0.0;
  ok &= std::abs(tukey_rho(c - 1e-9, c) - tukey_rho(c + 1e-9, c)) < 1e-7;  // continuity at |e|=c
  ok &= std::abs(tukey_rho(-c + 1e-9, c)) < 1e-7;
  const double rho1 = tukey_rho(1.0, c);
  ok &= std::abs(rho1 - 0.91096) <= 1e-5;
  const double mad_a = mad_scale({-1.0, 0.0, 1.0}, 0.0);
  const double mad_b = mad_scale({1.0, 2.0, 3.0, 4.0, 100.0}, 0.0);
  ok &= std::abs(mad_a - 1.0 / 0.6745) < 1e-9;
  ok &= std::abs(mad_b - 1.0 / 0.6745) < 1e-9;
  report(2, "tukey unit suite", ok,
         fmt("rho(1)=%.6f, MAD examples %.9f / %.9f", rho1, mad_a, mad_b), sw.seconds(), 1.0);
}

TEST_CASE("criterion_3_nmi_bounds") {
  Stopwatch sw;
  NmiConfig cfg;
  cfg.bins = 16;
  cfg.lo = 0.0;
  cfg.hi = 100.0;

  // independent joint-histogram oracle
  const auto oracle = [&](const std::vector<double>& x, const std::vector<double>& y) {
    const int bins = cfg.bins;
    std::vector<double> joint(bins * bins, 0.0), px(bins, 0.0), py(bins, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const int a = std::clamp(int((x[i] - cfg.lo) / (cfg.hi - cfg.lo) * bins), 0, bins - 1);
      const int b = std::clamp(int((y[i] - cfg.lo) / (cfg.hi - cfg.lo) * bins), 0, bins - 1);
      joint[a * bins + b] += 1.0;
      px[a] += 1.0;
      py[b] += 1.0;
    }
    const double n = double(x.size());
    const auto H = [&](const std::vector<double>& d) {
      double h = 0.0;
      for (double v : d)
        if (v > 0.0) h -= (v / n) * std::log(v / n);
      return h;
    };
    return -(H(px) + H(py)) / H(joint);
  };

  std::vector<double> ident;
  for (int i = 0; i < 10; ++i) ident.push_back(5.0 + 9.0 * i);
  const double d_same = nmi_from_pairs(ident, ident, cfg);
  bool ok = std::abs(d_same + 2.0) < 1e-6;

  std::vector<double> ix, iy;
  const double centers[] = {10.0, 35.0, 60.0, 85.0};
  for (double a : centers)
    for (double b : centers) {
      ix.push_back(a);
      iy.push_back(b);
    }
  const double d_indep = nmi_from_pairs(ix, iy, cfg);
  ok &= std::abs(d_indep + 1.0) < 1e-6;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  double worst_dev = 0.0;
  bool in_bounds = true;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x, y;
    for (int i = 0; i < 300; ++i) {
      x.push_back(u(rng));
      y.push_back(t % 2 == 0 ? u(rng) : std::min(100.0, x.back() * 0.7 + 0.3 * u(rng)));
    }
    const double d = nmi_from_pairs(x, y, cfg);
    in_bounds &= d <= -1.0 + 1e-9 && d >= -2.0 - 1e-9;
    worst_dev = std::max(worst_dev, std::abs(d - oracle(x, y)));
  }
  ok &= in_bounds && worst_dev <= 1e-6;
  report(3, "nmi bounds", ok,
         fmt("identical %.6f, independent %.6f, 100 toys in bounds, worst oracle dev %.2e",
             d_same, d_indep, worst_dev),
         sw.seconds(), 5.0);
}

TEST_CASE("criterion_4_clean_phantom_recovery") {
  Stopwatch sw;
  PhantomSpec spec;
  spec.dims = {64, 64, 64};
  spec.spacing = {2.0, 2.0, 2.0};
  spec.structure_seed = 2;
  const Phantom ph = make_phantom(spec);

  RefineConfig cfg;  // lambda = 0.5 default
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> tilt(0.0, 15.0 * M_PI / 180.0);
  std::uniform_real_distribution<double> off(-15.0, 15.0);
  std::vector<double> theta, te;
  for (int i = 0; i < 10; ++i) {
    const SymmetryPlane init = perturb_plane(ph.plane, tilt(rng), off(rng), rng);
    const RefineResult res = optimize_plane(ph.volume, init, cfg);
    theta.push_back(rotation_error_deg(res.plane.normal, ph.plane.normal));
    te.push_back(translation_error_mm(res.plane, ph.plane));
  }
  const double med_theta = median_of(theta), med_te = median_of(te);
  const bool ok = med_te < 1.0 && med_theta < 1.0;
  report(4, "clean-phantom recovery", ok,
         fmt("10 inits within +/-15 mm/15 deg: median theta_e %.3f deg, median t_e %.3f mm",
             med_theta, med_te),
         sw.seconds(), 300.0);
}

TEST_CASE("criterion_5_robustness_grid") {
  Stopwatch sw;
  ExperimentConfig cfg;
  cfg.id = "noise_grid";
  cfg.seed = 11;
  cfg.repetitions = 5;
  cfg.output_dir = out_dir();
  cfg.jobs = default_jobs();
  const ExperimentOutput out = run_experiment(cfg);
  // columns: dislocation, noise, robust, lambda, rep, theta_init, t_init, theta_e, t_e, runtime
  bool cells_ok = true;
  std::string worst_cell = "-";
  double worst_val = 0.0;
  for (double d : {0.0, 0.1, 0.2})
    for (double nz : {0.0, 0.2}) {
      std::vector<double> theta, te;
      for (const auto& r : out.rows)
        if (r[0] == d && r[1] == nz && r[2] == 1.0 && r[3] > 0.0) {
          theta.push_back(r[7]);
          te.push_back(r[8]);
        }
      const double mt = mean_of(theta), mte = mean_of(te);
      if (!(mte <= 2.0 && mt <= 2.0)) cells_ok = false;
      if (std::max(mt, mte) > worst_val) {
        worst_val = std::max(mt, mte);
        worst_cell = fmt("d%.0f/n%.0f mean %.2f deg %.2f mm", d * 100, nz * 100, mt, mte);
      }
    }
  // Tukey vs plain L2 (same optimizer, same inits, lambda 0 so the shared
  // distribution term does not mask the data term) on median t_e over
  // >= 10% dislocation runs
  std::vector<double> te_tukey, te_l2;
  for (const auto& r : out.rows)
    if (r[0] >= 0.1 && r[3] == 0.0) (r[2] == 1.0 ? te_tukey : te_l2).push_back(r[8]);
  const double med_tukey = median_of(te_tukey), med_l2 = median_of(te_l2);
  const bool ablation_ok = med_tukey < med_l2;
  report(5, "robustness grid", cells_ok && ablation_ok,
         fmt("worst <=20%%/<=20%% cell: %s; median t_e at >=10%% dislocation: tukey %.3f vs l2 "
             "%.3f mm",
             worst_cell.c_str(), med_tukey, med_l2),
         sw.seconds(), 1800.0);
}

TEST_CASE("criterion_6_lambda_sweep") {
  Stopwatch sw;
  ExperimentConfig cfg;
  cfg.id = "lambda_sweep";
  cfg.seed = 11;
  cfg.output_dir = out_dir();
  cfg.jobs = default_jobs();
  const ExperimentOutput out = run_experiment(cfg);
  // columns: lambda, case, rep, theta_init, t_init, theta_e, t_e, total, runtime
  const auto medians = [&](double lambda) {
    std::vector<double> theta, te;
    for (const auto& r : out.rows)
      if (r[0] == lambda) {
        theta.push_back(r[5]);
        te.push_back(r[6]);
      }
    return std::pair<double, double>{median_of(theta), median_of(te)};
  };
  const auto [theta0, te0] = medians(0.0);
  bool ok = true;
  std::string detail = fmt("lambda 0: %.3f deg %.3f mm", theta0, te0);
  const double eps = 1e-9;  // exact ties allowed
  for (double l : {0.25, 0.5, 0.75, 1.0}) {
    const auto [th, te] = medians(l);
    ok &= th <= theta0 + eps && te <= te0 + eps;
    detail += fmt("; %.2f: %.3f deg %.3f mm", l, th, te);
  }
  report(6, "lambda sweep", ok, detail, sw.seconds(), 1200.0);
}

TEST_CASE("criterion_7_capture_range") {
  Stopwatch sw;
  ExperimentConfig cfg;
  cfg.id = "capture_range";
  cfg.seed = 11;
  cfg.output_dir = out_dir();
  cfg.jobs = default_jobs();
  const ExperimentOutput out = run_experiment(cfg);
  // columns: bucket, rep, theta_init, t_init, theta_e, t_e, runtime
  std::vector<double> mean_theta(6), mean_te(6);
  for (int b = 0; b < 6; ++b) {
    std::vector<double> theta, te;
    for (const auto& r : out.rows)
      if (int(r[0]) == b) {
        theta.push_back(r[4]);
        te.push_back(r[5]);
      }
    mean_theta[b] = mean_of(theta);
    mean_te[b] = mean_of(te);
  }
  const bool first_three = mean_te[0] < 2.0 && mean_te[1] < 2.0 && mean_te[2] < 2.0;
  const bool degrades = mean_te[5] > mean_te[0] && mean_theta[5] > mean_theta[0];
  std::string detail =
      fmt("mean t_e per 5 mm/5 deg bucket: %.2f %.2f %.2f %.2f %.2f %.2f mm; mean theta_e "
          "bucket 6 %.2f vs bucket 1 %.2f deg",
          mean_te[0], mean_te[1], mean_te[2], mean_te[3], mean_te[4], mean_te[5], mean_theta[5],
          mean_theta[0]);
  if (first_three && !degrades)
    detail += " (no degradation observed: every bucket converges, so the capture range of the "
              "annealed optimizer exceeds the 30 mm/30 deg probe range)";
  report(7, "capture range", first_three && degrades, detail, sw.seconds(), 1800.0);
}

TEST_CASE("criterion_8_initialization_accuracy") {
  Stopwatch sw;
  ExperimentConfig cfg;
  cfg.id = "init_accuracy";
  cfg.seed = 0;
  cfg.repetitions = 10;
  cfg.output_dir = out_dir();
  cfg.jobs = default_jobs();
  const ExperimentOutput out = run_experiment(cfg);
  const int within = int(out.summary.at("within_capture_range"));
  const int funnel = int(out.summary.at("strictly_decreasing_stages"));
  const bool ok = within >= 9 && funnel == 10;
  report(8, "initialization accuracy", ok,
         fmt("within 15 deg/15 mm in %d/10 cases; strictly decreasing stage counts in %d/10",
             within, funnel),
         sw.seconds(), 1200.0);
}

TEST_CASE("criterion_9_landmark_fidelity") {
  Stopwatch sw;
  ExperimentConfig cfg;
  cfg.id = "landmark_eval";
  cfg.seed = 11;
  cfg.repetitions = 4;
  cfg.output_dir = out_dir();
  cfg.jobs = default_jobs();
  const ExperimentOutput out = run_experiment(cfg);
  const double mean_lm = out.summary.at("mean_landmark_mm");
  report(9, "landmark fidelity", mean_lm <= 5.0,
         fmt("3 fracture sites x 4 phantoms: mean mirrored-landmark distance %.2f mm", mean_lm),
         sw.seconds(), 900.0);
}

TEST_CASE("criterion_10_genus_zero_closure") {
  Stopwatch sw;
  bool ok = true;
  std::string detail;

  // adversarial voxel torus
  BinaryMask torus;
  torus.dims = {9, 5, 9};
  torus.bits.assign(9 * 5 * 9, 0);
  const auto box = [&](int i0, int i1, int j0, int j1, int k0, int k1) {
    for (int k = k0; k <= k1; ++k)
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) torus.set(i, j, k, true);
  };
  box(1, 7, 1, 3, 1, 2);
  box(1, 7, 1, 3, 6, 7);
  box(1, 2, 1, 3, 1, 7);
  box(6, 7, 1, 3, 1, 7);
  {
    const auto [mask, mesh] = close_genus(torus, build_reeb_graph(torus));
    const int chi = euler_characteristic(mesh);
    ok &= chi == 2;
    detail += fmt("torus chi %d", chi);
  }

  // phantom bone masks, clean and fractured
  for (double dis : {0.0, 0.2}) {
    PhantomSpec spec;
    spec.dims = {48, 48, 48};
    spec.dislocation_fraction = dis;
    const Phantom ph = make_phantom(spec);
    const BinaryMask bone = threshold_segment(ph.volume, kBoneWindowLo, kBoneWindowHi);
    const auto [mask, mesh] = close_genus(bone, build_reeb_graph(bone));
    const int chi = euler_characteristic(mesh);
    ok &= chi == 2;
    detail += fmt(", phantom(dis %.0f%%) chi %d", dis * 100, chi);
  }
  report(10, "genus-zero closure", ok, detail, sw.seconds(), 10.0);
}

TEST_CASE("criterion_11_ransac_oracles") {
  Stopwatch sw;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::normal_distribution<double> g;
  RansacConfig cfg;

  const auto make_pair = [](const Eigen::Vector3d& p, const Eigen::Vector3d& q, int id) {
    Correspondence c;
    c.p = 2 * id;
    c.q = 2 * id + 1;
    c.pos_p = p;
    c.pos_q = q;
    c.midpoint = 0.5 * (p + q);
    c.direction = (q - p).normalized();
    return c;
  };
  const auto ids = [](const CorrespondenceSet& cs) {
    std::vector<int> v;
    for (const auto& c : cs.pairs) v.push_back(c.p);
    std::sort(v.begin(), v.end());
    return v;
  };

  bool ok = true;
  int trials_run = 0;
  for (int t = 0; t < 20; ++t) {
    // planted: 9 x-direction pairs with midpoints on x = 5; 5 scattered outliers
    CorrespondenceSet cs;
    std::vector<int> planted;
    int id = 0;
    for (int i = 0; i < 9; ++i) {
      const Eigen::Vector3d mid(5.0, u(rng), u(rng));
      cs.pairs.push_back(make_pair(mid - Eigen::Vector3d(4, 0, 0),
                                   mid + Eigen::Vector3d(4, 0, 0), id));
      planted.push_back(2 * id);
      ++id;
    }
    for (int i = 0; i < 5; ++i) {
      Eigen::Vector3d d(g(rng), g(rng), g(rng));
      while (std::abs(d.normalized().x()) > 0.7) d = {g(rng), g(rng), g(rng)};
      const Eigen::Vector3d mid(u(rng) + 20.0, u(rng), u(rng));  // off-plane midpoints
      cs.pairs.push_back(
          make_pair(mid - 3.0 * d.normalized(), mid + 3.0 * d.normalized(), id++));
    }
    cfg.seed = t;
    const CorrespondenceSet s1 = ransac_directions(cs, cfg);
    const CorrespondenceSet s2 = ransac_midpoints(s1, cfg);
    ok &= ids(s1) == planted;  // exactly the planted set in both stages
    ok &= ids(s2) == planted;
    ++trials_run;
  }
  report(11, "ransac oracles", ok,
         fmt("%d planted 9/5 inlier/outlier sets, both stages exact", trials_run), sw.seconds(),
         10.0);
}

TEST_CASE("criterion_12_drr_physics") {
  Stopwatch sw;
  // uniform cube with mu = 0.02/mm; the trilinear support spans the voxel
  // centers, so the orthogonal central chord is 49 * 2 mm = 98 mm -> 1.96
  const double mu_water = attenuation_from_hu(0.0);
  const double hu = 1000.0 * (0.02 / mu_water) - 1000.0;
  Volume v;
  v.dims = {50, 50, 50};
  v.spacing = {2.0, 2.0, 2.0};
  v.voxels.assign(50 * 50 * 50, float(hu));

  CameraModel cam;
  Eigen::Vector3d center(49.0, 49.0, 49.0);
  cam.t = -center + Eigen::Vector3d(0.0, 0.0, 500.0);
  cam.sdd_mm = 1000.0;
  cam.pixel_spacing_mm = 4.0;
  cam.dims_px = {65, 65};
  cam.principal_point_px = {32.0, 32.0};

  const Image2D img = drr(v, cam);
  const double chord = img.at(32, 32);
  const double expect = 0.02 * 49.0 * 2.0;
  bool ok = std::abs(chord - expect) <= 0.01 * expect;

  Volume v2 = v;
  for (float& x : v2.voxels) x = 2.0f * x + 1000.0f;  // doubles mu
  const Image2D img2 = drr(v2, cam);
  double worst_lin = 0.0;
  for (int y = 0; y < img.height; y += 4)
    for (int x = 0; x < img.width; x += 4) {
      if (img.at(x, y) < 1e-3) continue;
      worst_lin = std::max(worst_lin, std::abs(img2.at(x, y) / img.at(x, y) - 2.0) / 2.0);
    }
  ok &= worst_lin <= 0.01;
  report(12, "drr physics", ok,
         fmt("central chord integral %.4f (expect %.2f), worst linearity deviation %.2f%%", chord,
             expect, 100.0 * worst_lin),
         sw.seconds(), 10.0);
}

TEST_CASE("criterion_13_registration_2d3d") {
  Stopwatch sw;
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  spec.structure_seed = 2;
  const Phantom ph = make_phantom(spec);

  CameraModel gt;
  Eigen::Vector3d center = ph.volume.origin;
  for (int a = 0; a < 3; ++a) center[a] += 0.5 * (ph.volume.dims[a] - 1) * ph.volume.spacing[a];
  gt.t = -center + Eigen::Vector3d(0.0, 0.0, 400.0);
  gt.sdd_mm = 800.0;
  gt.pixel_spacing_mm = 3.0;
  gt.dims_px = {48, 48};
  gt.principal_point_px = {24.0, 24.0};
  const Image2D target = drr(ph.volume, gt);

  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> mm(-5.0, 5.0);
  std::uniform_real_distribution<double> deg(-5.0, 5.0);
  int good = 0;
  double worst_rot = 0.0, worst_trans = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    // perturb orientation about the source (camera-frame rotation) and the
    // source position by up to 5 deg / 5 mm per axis
    CameraModel init = gt;
    const Eigen::Vector3d axis = Eigen::Vector3d(mm(rng), mm(rng), mm(rng)).normalized();
    const Eigen::Matrix3d dR =
        Eigen::AngleAxisd(deg(rng) * M_PI / 180.0, axis).toRotationMatrix();
    init.R = dR * gt.R;
    init.t = dR * gt.t + Eigen::Vector3d(mm(rng), mm(rng), mm(rng));
    // trans_bound covers the iso-center lever arm: a 5 deg source-centered
    // rotation maps to ~35 mm of camera translation at 400 mm source distance
    const RegisterResult res = register_2d3d(target, ph.volume, init, 0.2, 45.0, 100);

    const Eigen::AngleAxisd dr(res.camera.R * gt.R.transpose());
    const double rot_err = std::abs(dr.angle()) * 180.0 / M_PI;
    const double trans_err = (res.camera.source_world() - gt.source_world()).norm();
    worst_rot = std::max(worst_rot, rot_err);
    worst_trans = std::max(worst_trans, trans_err);
    if (rot_err <= 1.0 && trans_err <= 1.0) ++good;
  }
  report(13, "2d/3d self-registration", good >= 9,
         fmt("recovered within 1 mm/1 deg in %d/10 trials (worst %.2f deg / %.2f mm)", good,
             worst_rot, worst_trans),
         sw.seconds(), 300.0);
}

TEST_CASE("criterion_14_outlier_localization") {
  Stopwatch sw;
  PhantomSpec spec;
  spec.dims = {64, 64, 64};
  spec.dislocation_fraction = 0.1;
  spec.structure_seed = 1;
  const Phantom ph = make_phantom(spec);

  RefineConfig cfg;
  std::mt19937_64 rng(23);
  const SymmetryPlane init = perturb_plane(ph.plane, 5.0 * M_PI / 180.0, 5.0, rng);
  const RefineResult res = optimize_plane(ph.volume, init, cfg);

  const BinaryMask domain = evaluation_domain(ph.volume, cfg);
  const BinaryMask out = outlier_mask(ph.volume, reflection_from_plane(res.plane), domain,
                                      cfg.tukey);
  // planted asymmetry = the fragment region plus its mirror trace on the
  // intact side; both violate symmetry at the converged plane
  const ReflectionMap m = reflection_from_plane(ph.plane);
  std::size_t inter = 0, uni = 0;
  for (int k = 0; k < out.dims.z(); ++k)
    for (int j = 0; j < out.dims.y(); ++j)
      for (int i = 0; i < out.dims.x(); ++i) {
        if (!domain.get(i, j, k)) continue;
        bool planted = ph.fragment.get(i, j, k);
        if (!planted) {
          const Eigen::Vector3d q = m.apply(world_from_index(out, {i, j, k}));
          const Eigen::Vector3i qi = ((q - out.origin).cwiseQuotient(out.spacing) +
                                      Eigen::Vector3d::Constant(0.5))
                                         .cast<int>();
          planted = out.in_bounds(qi.x(), qi.y(), qi.z()) &&
                    ph.fragment.get(qi.x(), qi.y(), qi.z());
        }
        const bool flagged = out.get(i, j, k);
        inter += planted && flagged;
        uni += planted || flagged;
      }
  const double iou = uni == 0 ? 0.0 : double(inter) / double(uni);
  report(14, "outlier localization", iou >= 0.5,
         fmt("10%% dislocation: planted-fragment IoU %.3f", iou), sw.seconds(), 300.0);
}
