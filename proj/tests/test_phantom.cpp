#include <doctest.h>

#include "symplane/phantom.hpp"

#include <filesystem>

using namespace symplane;

namespace {

PhantomSpec small_spec() {
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  spec.spacing = {2.0, 2.0, 2.0};
  spec.structure_seed = 3;
  return spec;
}

}  // namespace

TEST_CASE("clean phantom is exactly mirror-symmetric on the lattice") {
  const Phantom ph = make_phantom(small_spec());
  const ReflectionMap m = reflection_from_plane(ph.plane);
  const Volume& v = ph.volume;
  double worst = 0.0;
  for (int k = 0; k < v.dims.z(); ++k)
    for (int j = 0; j < v.dims.y(); ++j)
      for (int i = 0; i < v.dims.x(); ++i) {
        const Eigen::Vector3d p = world_from_index(v, {i, j, k});
        const Eigen::Vector3d q = m.apply(p);
        // default plane bisects the grid, so lattice mirrors are lattice points
        const double r = std::abs(v.at(i, j, k) - sample_trilinear(v, q));
        worst = std::max(worst, r);
      }
  CHECK(worst == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("same seed reproduces the phantom bit-identically") {
  const Phantom a = make_phantom(small_spec());
  const Phantom b = make_phantom(small_spec());
  CHECK(a.volume.voxels == b.volume.voxels);
  CHECK(a.plane.normal == b.plane.normal);
}

TEST_CASE("dislocation_fraction controls the planted fragment size") {
  PhantomSpec spec = small_spec();
  spec.dims = {64, 64, 64};
  spec.dislocation_fraction = 0.1;
  const Phantom ph = make_phantom(spec);
  REQUIRE(ph.has_fragment);
  const double frac =
      static_cast<double>(ph.fragment.count()) / static_cast<double>(ph.volume.size());
  CHECK(frac == doctest::Approx(0.1).epsilon(0.2));  // 0.1 +/- 0.02
}

TEST_CASE("landmarks come in mirrored pairs named L1..L4") {
  const Phantom ph = make_phantom(small_spec());
  REQUIRE(ph.landmarks.size() == 4);
  const ReflectionMap m = reflection_from_plane(ph.plane);
  for (std::size_t i = 0; i < ph.landmarks.size(); ++i) {
    const Landmark& lm = ph.landmarks[i];
    CHECK(lm.name == "L" + std::to_string(i + 1));
    CHECK((m.apply(lm.positive_side) - lm.negative_side).norm() < 1e-9);
    CHECK(ph.plane.signed_distance(lm.positive_side) > 0.0);
  }
}

TEST_CASE("apply_dislocation contract") {
  PhantomSpec spec = small_spec();
  spec.dislocation_fraction = 0.1;
  const Phantom ph = make_phantom(spec);
  REQUIRE(ph.has_fragment);

  SUBCASE("identity motion leaves the volume unchanged") {
    const Volume out =
        apply_dislocation(ph.volume, ph.fragment, Eigen::Isometry3d::Identity());
    double worst = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i)
      worst = std::max(worst, std::abs(double(out.voxels[i]) - double(ph.volume.voxels[i])));
    CHECK(worst <= 2.0);  // interpolation tolerance
  }

  SUBCASE("lattice-aligned translation preserves the bone total within 2%") {
    // a whole-voxel shift keeps resampling exact; off-lattice shifts blur the
    // thresholded boundary and may change the count by a few percent
    Eigen::Isometry3d motion = Eigen::Isometry3d::Identity();
    motion.translation() = Eigen::Vector3d(4.0, 0.0, 0.0);
    const Volume out = apply_dislocation(ph.volume, ph.fragment, motion);
    const auto bone_count = [](const Volume& v) {
      return threshold_segment(v, kBoneWindowLo, kBoneWindowHi).count();
    };
    const double before = static_cast<double>(bone_count(ph.volume));
    const double after = static_cast<double>(bone_count(out));
    CHECK(std::abs(after - before) / before < 0.02);
  }

  SUBCASE("motion pushing the fragment outside the grid is an error") {
    Eigen::Isometry3d motion = Eigen::Isometry3d::Identity();
    motion.translation() = Eigen::Vector3d(1000.0, 0.0, 0.0);
    CHECK_THROWS(apply_dislocation(ph.volume, ph.fragment, motion));
  }
}

TEST_CASE("plane/landmark sidecar round-trips") {
  const Phantom ph = make_phantom(small_spec());
  const std::string path =
      (std::filesystem::temp_directory_path() / "symplane_sidecar.json").string();
  save_sidecar(ph.plane, ph.landmarks, path);
  const auto [plane, landmarks] = load_sidecar(path);
  CHECK((plane.point - ph.plane.point).norm() < 1e-9);
  CHECK((plane.normal - ph.plane.normal).norm() < 1e-9);
  REQUIRE(landmarks.size() == ph.landmarks.size());
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    CHECK(landmarks[i].name == ph.landmarks[i].name);
    CHECK((landmarks[i].positive_side - ph.landmarks[i].positive_side).norm() < 1e-9);
  }
}

TEST_CASE("degenerate spec is rejected") {
  PhantomSpec spec = small_spec();
  spec.dims = {0, 48, 48};
  CHECK_THROWS(make_phantom(spec));
  spec = small_spec();
  spec.dislocation_fraction = 0.5;  // above the stated [0, 0.3] range
  CHECK_THROWS(make_phantom(spec));
  spec = small_spec();
  spec.noise_fraction = 0.8;  // above the stated [0, 0.4] range
  CHECK_THROWS(make_phantom(spec));
}
