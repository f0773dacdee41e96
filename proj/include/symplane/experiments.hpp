#pragma once

#include "symplane/phantom.hpp"
#include "symplane/refine.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace symplane {

struct ExperimentConfig {
  std::string id;                  // lambda_sweep | noise_grid | capture_range |
                                   // init_accuracy | landmark_eval
  std::string output_dir = ".";
  int repetitions = -1;            // -1 selects the experiment's default
  std::uint64_t seed = 0;
  int jobs = 1;                    // concurrent runs; results are order-stable
  Eigen::Vector3i dims{64, 64, 64};
  double spacing_mm = 2.0;

  void validate() const;
};

struct ExperimentOutput {
  std::string csv_path;
  std::string summary_path;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;          // one row per run
  std::map<std::string, double> summary;          // aggregate statistics
};

/// Runs one experiment harness, writes <id>.csv and <id>_summary.json into
/// output_dir, and returns the rows and aggregates. Runs execute concurrently
/// up to `jobs`; per-run seeds derive from (seed, run index), so output is
/// byte-identical across job counts. A failed run yields NaN metrics in its
/// row instead of aborting the sweep.
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

/// Tilts the ground-truth normal by theta (radians) about a random in-plane
/// axis and shifts the plane point by offset_mm along the original normal.
SymmetryPlane perturb_plane(const SymmetryPlane& gt, double theta, double offset_mm,
                            std::mt19937_64& rng);

/// Parallelism default: SYMPLANE_JOBS if set, else 1.
int default_jobs();

}  // namespace symplane
