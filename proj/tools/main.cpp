// symplane: bilateral-symmetry plane detection for 3D volumes.
//
// Subcommands: phantom, detect, mirror, drr, augment, eval, experiment.
// Exit codes: 0 success, 2 input error, 3 stage failure, 4 convergence warning.

#include "symplane/augment.hpp"
#include "symplane/experiments.hpp"
#include "symplane/metrics.hpp"
#include "symplane/phantom.hpp"
#include "symplane/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitStage = 3;
constexpr int kExitConvergence = 4;

using symplane::SymmetryPlane;

/// Expands --config <file.json>: keys not already present on the command line
/// are appended as "--key value" after the subcommand. Flags override config.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--config") config_path = args[i + 1];
  if (config_path.empty()) return args;

  std::ifstream f(config_path);
  if (!f) throw std::runtime_error("cannot open config file " + config_path);
  nlohmann::json j;
  f >> j;
  if (!j.is_object()) throw std::runtime_error("config must be a JSON object");

  auto present = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag) return true;
    return false;
  };
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (present(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
      continue;
    }
    args.push_back(flag);
    args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
  }
  return args;
}

int cmd_phantom(const std::string& out, const std::string& sidecar, int dim, double spacing,
                std::uint64_t seed, double dislocation, double noise, int site) {
  symplane::PhantomSpec spec;
  spec.dims = Eigen::Vector3i::Constant(dim);
  spec.spacing = Eigen::Vector3d::Constant(spacing);
  spec.structure_seed = seed;
  spec.dislocation_fraction = dislocation;
  spec.noise_fraction = noise;
  spec.site = static_cast<symplane::FractureSite>(site);
  spec.validate();
  const symplane::Phantom ph = symplane::make_phantom(spec);
  symplane::save_volume(ph.volume, out);
  symplane::save_sidecar(ph.plane, ph.landmarks, sidecar.empty() ? out + ".json" : sidecar);
  return kExitOk;
}

int cmd_detect(const std::string& in, const std::string& out, const std::string& report_path,
               const std::string& outliers_path, double lambda, std::uint64_t seed, int trials,
               bool skip_refine, bool use_nelder_mead) {
  const symplane::Volume v = symplane::load_volume(in);
  symplane::DetectConfig cfg;
  cfg.seed = seed;
  cfg.vote_trials = trials;
  cfg.skip_refine = skip_refine;
  cfg.refine.lambda = lambda;
  cfg.refine.use_nelder_mead = use_nelder_mead;
  const symplane::DetectResult res = symplane::detect(v, cfg);

  symplane::save_plane_json(res.plane, out, &res.init);
  if (!skip_refine) {
    if (!report_path.empty()) symplane::save_cost_report(res.report, report_path);
    if (!outliers_path.empty()) {
      symplane::Volume mask;
      mask.dims = res.outliers.dims;
      mask.spacing = res.outliers.spacing;
      mask.origin = res.outliers.origin;
      mask.voxels.assign(res.outliers.bits.begin(), res.outliers.bits.end());
      symplane::save_volume(mask, outliers_path);
    }
    if (res.report.iterations >= cfg.refine.max_iter) {
      std::cerr << "warning: refine: iteration budget exhausted before convergence\n";
      return kExitConvergence;
    }
  }
  return kExitOk;
}

int cmd_mirror(const std::string& in, const std::string& plane_path, const std::string& out,
               int healthy_side) {
  const symplane::Volume v = symplane::load_volume(in);
  const SymmetryPlane plane = symplane::load_plane_json(plane_path);
  symplane::save_volume(symplane::mirror_template(v, plane, healthy_side), out);
  return kExitOk;
}

int cmd_drr(const std::string& in, const std::string& camera_path, const std::string& out) {
  const symplane::Volume v = symplane::load_volume(in);
  const symplane::CameraModel cam = symplane::load_camera_json(camera_path);
  symplane::save_pgm(symplane::drr(v, cam), out);
  return kExitOk;
}

int cmd_augment(const std::string& in, const std::string& plane_path,
                const std::string& camera_path, const std::string& xray_path,
                const std::string& out, const std::string& contours_path, bool no_register,
                int healthy_side) {
  const symplane::Volume v = symplane::load_volume(in);
  const SymmetryPlane plane = symplane::load_plane_json(plane_path);
  symplane::CameraModel cam = symplane::load_camera_json(camera_path);
  const symplane::Image2D xray = symplane::load_pgm(xray_path);
  if (xray.width != cam.dims_px.x() || xray.height != cam.dims_px.y())
    throw std::invalid_argument("augment: xray dims do not match the camera");

  const symplane::Volume tmpl = symplane::mirror_template(v, plane, healthy_side);
  double score = -1.0;
  if (!no_register) {
    const symplane::RegisterResult reg =
        symplane::register_2d3d(xray, v, cam, 5.0 * M_PI / 180.0, 20.0);
    cam = reg.camera;
    score = reg.score;
    if (reg.score < 0.8) {
      std::cerr << "warning: augment: low registration confidence (NCC " << reg.score << ")\n";
    }
  }
  const symplane::Image2D contours = symplane::edge_contours(tmpl, cam);
  if (!contours_path.empty()) symplane::save_pgm(contours, contours_path);
  symplane::save_ppm(symplane::overlay(xray, contours), out);
  if (!no_register && score < 0.8) return kExitConvergence;
  return kExitOk;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path, const std::string& out) {
  const SymmetryPlane est = symplane::load_plane_json(est_path);
  const SymmetryPlane gt = symplane::load_plane_json(gt_path);
  const double theta = symplane::rotation_error_deg(est.normal, gt.normal);
  const double t = symplane::translation_error_mm(est, gt);
  nlohmann::json j;
  j["theta_e_deg"] = theta;
  j["t_e_mm"] = t;
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("eval: cannot open " + out);
    f << j.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_experiment(const std::string& id, const std::string& out_dir, int repetitions,
                   std::uint64_t seed, int jobs, int dim, double spacing) {
  symplane::ExperimentConfig cfg;
  cfg.id = id;
  cfg.output_dir = out_dir;
  cfg.repetitions = repetitions;
  cfg.seed = seed;
  cfg.jobs = jobs > 0 ? jobs : symplane::default_jobs();
  cfg.dims = Eigen::Vector3i::Constant(dim);
  cfg.spacing_mm = spacing;
  const symplane::ExperimentOutput out = symplane::run_experiment(cfg);
  std::cout << "wrote " << out.csv_path << " and " << out.summary_path << " (" << out.rows.size()
            << " runs)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilateral-symmetry plane detection in 3D volumes"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its keys")
      ->expected(1);

  // phantom
  auto* sc_phantom = app.add_subcommand("phantom", "Generate a synthetic symmetric volume");
  std::string ph_out, ph_sidecar;
  int ph_dim = 64, ph_site = 0;
  double ph_spacing = 2.0, ph_dislocation = 0.0, ph_noise = 0.0;
  std::uint64_t ph_seed = 0;
  sc_phantom->add_option("--out", ph_out)->required();
  sc_phantom->add_option("--sidecar", ph_sidecar, "ground-truth plane + landmarks JSON");
  sc_phantom->add_option("--dim", ph_dim);
  sc_phantom->add_option("--spacing", ph_spacing);
  sc_phantom->add_option("--seed", ph_seed);
  sc_phantom->add_option("--dislocation", ph_dislocation);
  sc_phantom->add_option("--noise", ph_noise);
  sc_phantom->add_option("--site", ph_site, "0 wing, 1 ring, 2 shear");
  sc_phantom->add_option("--config", config_path);

  // detect
  auto* sc_detect = app.add_subcommand("detect", "Detect the symmetry plane");
  std::string de_in, de_out, de_report, de_outliers;
  double de_lambda = 0.5;
  std::uint64_t de_seed = 0;
  int de_trials = 2000;
  bool de_skip_refine = false, de_nelder = false;
  sc_detect->add_option("--in", de_in)->required();
  sc_detect->add_option("--out", de_out, "plane JSON")->required();
  sc_detect->add_option("--report", de_report, "cost report JSON");
  sc_detect->add_option("--outliers", de_outliers, "symmetry-violator mask volume");
  sc_detect->add_option("--lambda", de_lambda);
  sc_detect->add_option("--seed", de_seed);
  sc_detect->add_option("--trials", de_trials);
  sc_detect->add_flag("--skip-refine", de_skip_refine, "stop after initialization");
  sc_detect->add_flag("--nelder-mead", de_nelder, "fallback optimizer");
  sc_detect->add_option("--config", config_path);

  // mirror
  auto* sc_mirror = app.add_subcommand("mirror", "Mirrored non-fractured template");
  std::string mi_in, mi_plane, mi_out;
  int mi_side = -1;
  sc_mirror->add_option("--in", mi_in)->required();
  sc_mirror->add_option("--plane", mi_plane)->required();
  sc_mirror->add_option("--out", mi_out)->required();
  sc_mirror->add_option("--healthy-side", mi_side, "+1 or -1");
  sc_mirror->add_option("--config", config_path);

  // drr
  auto* sc_drr = app.add_subcommand("drr", "Render a digitally reconstructed radiograph");
  std::string dr_in, dr_cam, dr_out;
  sc_drr->add_option("--in", dr_in)->required();
  sc_drr->add_option("--camera", dr_cam)->required();
  sc_drr->add_option("--out", dr_out, "16-bit PGM")->required();
  sc_drr->add_option("--config", config_path);

  // augment
  auto* sc_augment = app.add_subcommand("augment", "Overlay mirrored-template contours");
  std::string au_in, au_plane, au_cam, au_xray, au_out, au_contours;
  bool au_noreg = false;
  int au_side = -1;
  sc_augment->add_option("--in", au_in)->required();
  sc_augment->add_option("--plane", au_plane)->required();
  sc_augment->add_option("--camera", au_cam)->required();
  sc_augment->add_option("--xray", au_xray, "16-bit PGM")->required();
  sc_augment->add_option("--out", au_out, "overlay PPM")->required();
  sc_augment->add_option("--contours", au_contours, "optional contour PGM");
  sc_augment->add_flag("--no-register", au_noreg, "use the camera verbatim");
  sc_augment->add_option("--healthy-side", au_side);
  sc_augment->add_option("--config", config_path);

  // eval
  auto* sc_eval = app.add_subcommand("eval", "Plane error metrics vs ground truth");
  std::string ev_est, ev_gt, ev_out;
  sc_eval->add_option("--est", ev_est)->required();
  sc_eval->add_option("--gt", ev_gt)->required();
  sc_eval->add_option("--out", ev_out);
  sc_eval->add_option("--config", config_path);

  // experiment
  auto* sc_exp = app.add_subcommand("experiment", "Run an evaluation harness");
  std::string ex_id, ex_dir = ".";
  int ex_reps = -1, ex_jobs = 0, ex_dim = 64;
  double ex_spacing = 2.0;
  std::uint64_t ex_seed = 0;
  sc_exp->add_option("--id", ex_id,
                     "lambda_sweep | noise_grid | capture_range | init_accuracy | landmark_eval")
      ->required();
  sc_exp->add_option("--out-dir", ex_dir);
  sc_exp->add_option("--repetitions", ex_reps);
  sc_exp->add_option("--seed", ex_seed);
  sc_exp->add_option("--jobs", ex_jobs, "default: SYMPLANE_JOBS or 1");
  sc_exp->add_option("--dim", ex_dim);
  sc_exp->add_option("--spacing", ex_spacing);
  sc_exp->add_option("--config", config_path);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = apply_config(args);
  } catch (const std::exception& e) {
    std::cerr << "error: input: " << e.what() << "\n";
    return kExitInput;
  }
  try {
    // CLI11 consumes reversed arguments
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (sc_phantom->parsed())
      return cmd_phantom(ph_out, ph_sidecar, ph_dim, ph_spacing, ph_seed, ph_dislocation,
                         ph_noise, ph_site);
    if (sc_detect->parsed())
      return cmd_detect(de_in, de_out, de_report, de_outliers, de_lambda, de_seed, de_trials,
                        de_skip_refine, de_nelder);
    if (sc_mirror->parsed()) return cmd_mirror(mi_in, mi_plane, mi_out, mi_side);
    if (sc_drr->parsed()) return cmd_drr(dr_in, dr_cam, dr_out);
    if (sc_augment->parsed())
      return cmd_augment(au_in, au_plane, au_cam, au_xray, au_out, au_contours, au_noreg,
                         au_side);
    if (sc_eval->parsed()) return cmd_eval(ev_est, ev_gt, ev_out);
    if (sc_exp->parsed())
      return cmd_experiment(ex_id, ex_dir, ex_reps, ex_seed, ex_jobs, ex_dim, ex_spacing);
  } catch (const symplane::StageError& e) {
    std::cerr << "error: stage " << e.stage() << ": " << e.what() << "\n";
    return kExitStage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: input: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitInput;
}
