#include <doctest.h>

#include "symplane/volume.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace symplane;

namespace {

Volume make_volume(int nx, int ny, int nz, float fill = 0.0f) {
  Volume v;
  v.dims = {nx, ny, nz};
  v.voxels.assign(static_cast<std::size_t>(nx) * ny * nz, fill);
  return v;
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("volume round-trip save/load is exact") {
  Volume v = make_volume(2, 2, 2);
  const std::string path = tmp_path("symplane_rt.vol");

  SUBCASE("zeros") {
    save_volume(v, path);
    const Volume r = load_volume(path);
    CHECK(r.dims == v.dims);
    CHECK(r.voxels == v.voxels);
  }

  SUBCASE("random payload, metadata bit-exact") {
    v.spacing = {0.7, 1.3, 2.9};
    v.origin = {-12.5, 3.25, 100.0};
    std::mt19937 rng(42);
    std::uniform_real_distribution<float> hu(-1000.0f, 2000.0f);
    for (float& x : v.voxels) x = hu(rng);
    save_volume(v, path);
    const Volume r = load_volume(path);
    CHECK(r.dims == v.dims);
    CHECK(r.spacing == v.spacing);
    CHECK(r.origin == v.origin);
    CHECK(r.voxels == v.voxels);  // bit-exact
  }
}

TEST_CASE("load_volume rejects a payload size mismatch") {
  Volume v = make_volume(4, 4, 4);
  const std::string path = tmp_path("symplane_bad.vol");
  save_volume(v, path);
  // truncate the raw payload to 63 voxels
  const std::string raw = path + ".raw";
  std::filesystem::resize_file(raw, 63 * sizeof(float));
  CHECK_THROWS(load_volume(path));
}

TEST_CASE("load_volume rejects malformed headers") {
  const std::string path = tmp_path("symplane_hdr.vol");
  std::ofstream(path) << "dims 2 2\nbogus_key 1\n";
  CHECK_THROWS(load_volume(path));
}

TEST_CASE("world_from_index applies origin and spacing") {
  Volume v = make_volume(4, 4, 4);
  CHECK(world_from_index(v, {3, 0, 0}) == Eigen::Vector3d(3, 0, 0));

  v.origin = {10, 0, 0};
  v.spacing = {2, 1, 1};
  CHECK(world_from_index(v, {1, 1, 1}) == Eigen::Vector3d(12, 1, 1));

  CHECK_THROWS(world_from_index(v, {4, 0, 0}));  // idx == nx out of range
}

TEST_CASE("sample_trilinear: lattice exactness, linearity, outside value") {
  Volume v = make_volume(3, 3, 3);
  v.at(1, 1, 1) = 10.0f;
  CHECK(sample_trilinear(v, {1, 1, 1}) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(sample_trilinear(v, {0, 0, 0}) == doctest::Approx(0.0).epsilon(1e-12));

  // midpoint between voxels valued 0 and 10 along x
  CHECK(sample_trilinear(v, {0.5, 1, 1}) == doctest::Approx(5.0).epsilon(1e-12));

  // linearity along an axis between neighbors
  for (double t : {0.1, 0.25, 0.75}) {
    CHECK(sample_trilinear(v, {t, 1.0, 1.0}) == doctest::Approx(10.0 * t).epsilon(1e-12));
  }

  CHECK(sample_trilinear(v, {102.0, 1.0, 1.0}) == doctest::Approx(kOutsideValue));
}

TEST_CASE("threshold_segment windowing") {
  Volume v = make_volume(4, 4, 4, 300.0f);
  CHECK(threshold_segment(v, 200, 3000).count() == v.size());
  CHECK(threshold_segment(v, 400, 3000).count() == 0);
  CHECK_THROWS(threshold_segment(v, 3000, 200));  // lo >= hi
}

TEST_CASE("threshold_segment count is monotone in the window bounds") {
  Volume v = make_volume(8, 8, 8);
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> hu(-1000.0f, 2000.0f);
  for (float& x : v.voxels) x = hu(rng);

  std::size_t prev = v.size() + 1;
  for (double lo : {-1000.0, 0.0, 200.0, 500.0, 1000.0}) {
    const std::size_t c = threshold_segment(v, lo, 2500.0).count();
    CHECK(c <= prev);  // non-increasing in lo
    prev = c;
  }
  prev = 0;
  for (double hi : {-500.0, 0.0, 500.0, 1500.0, 2500.0}) {
    const std::size_t c = threshold_segment(v, -900.0, hi).count();
    CHECK(c >= prev);  // non-decreasing in hi
    prev = c;
  }
}

TEST_CASE("histogram counts masked voxels only and clamps to end bins") {
  Volume v = make_volume(2, 2, 2, 500.0f);
  BinaryMask m = BinaryMask::like(v);
  for (auto& b : m.bits) b = 1;

  SUBCASE("all equal -> single bin") {
    const Histogram h = histogram(v, m, 8, 0.0, 1000.0);
    CHECK(h.total == 8);
    std::uint64_t nonzero = 0, maxc = 0;
    for (auto c : h.counts) {
      if (c > 0) ++nonzero;
      maxc = std::max(maxc, c);
    }
    CHECK(nonzero == 1);
    CHECK(maxc == 8);
  }

  SUBCASE("two values split 4/4") {
    for (int i = 0; i < 4; ++i) v.voxels[i] = 100.0f;
    const Histogram h = histogram(v, m, 2, 0.0, 1000.0);
    CHECK(h.counts[0] == 4);
    CHECK(h.counts[1] == 4);
  }

  SUBCASE("normalized form sums to 1") {
    const Histogram h = histogram(v, m, 16, 0.0, 1000.0);
    double sum = 0.0;
    for (double p : h.normalized()) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("empty mask is an error") {
    for (auto& b : m.bits) b = 0;
    CHECK_THROWS(histogram(v, m, 8, 0.0, 1000.0));
  }
}

TEST_CASE("add_gaussian_noise contract") {
  Volume v = make_volume(64, 64, 32, 1000.0f);  // >= 10^5 voxels

  SUBCASE("fraction 0 is the identity") {
    const Volume n = add_gaussian_noise(v, 0.0, 1);
    CHECK(n.voxels == v.voxels);
  }

  SUBCASE("sample sigma matches fraction * max within tolerance") {
    const Volume n = add_gaussian_noise(v, 0.1, 99);
    double mean = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) mean += n.voxels[i] - v.voxels[i];
    mean /= static_cast<double>(n.size());
    double var = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double d = n.voxels[i] - v.voxels[i] - mean;
      var += d * d;
    }
    const double sigma = std::sqrt(var / static_cast<double>(n.size() - 1));
    CHECK(sigma == doctest::Approx(100.0).epsilon(0.05));  // 100 +/- 5
  }

  SUBCASE("deterministic per seed, different across seeds") {
    const Volume a = add_gaussian_noise(v, 0.1, 5);
    const Volume b = add_gaussian_noise(v, 0.1, 5);
    const Volume c = add_gaussian_noise(v, 0.1, 6);
    CHECK(a.voxels == b.voxels);
    CHECK(a.voxels != c.voxels);
  }

  SUBCASE("negative fraction rejected") { CHECK_THROWS(add_gaussian_noise(v, -0.1, 1)); }
}

TEST_CASE("gaussian_blur preserves constants and the mean") {
  Volume v = make_volume(16, 16, 16, 40.0f);
  const Volume b = gaussian_blur(v, 2.0);
  for (float x : b.voxels) CHECK(x == doctest::Approx(40.0f).epsilon(1e-5));

  v.at(8, 8, 8) = 1000.0f;
  const Volume s = gaussian_blur(v, 1.5);
  CHECK(s.at(8, 8, 8) < 1000.0f);   // peak spread out
  CHECK(s.at(7, 8, 8) > 40.0f);     // neighbors picked mass up
}
