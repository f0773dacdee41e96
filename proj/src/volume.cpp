#include "symplane/volume.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace symplane {

float Volume::max_value() const {
  float m = -std::numeric_limits<float>::infinity();
  for (float v : voxels) m = std::max(m, v);
  return m;
}

void Volume::validate() const {
  if (dims.minCoeff() <= 0) throw std::invalid_argument("volume: non-positive dims");
  if (spacing.minCoeff() <= 0.0) throw std::invalid_argument("volume: non-positive spacing");
  const std::size_t n = static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
  if (voxels.size() != n) throw std::invalid_argument("volume: voxel count mismatch");
  for (float v : voxels)
    if (!std::isfinite(v)) throw std::invalid_argument("volume: non-finite voxel value");
}

std::size_t BinaryMask::count() const {
  std::size_t n = 0;
  for (auto b : bits) n += b ? 1 : 0;
  return n;
}

BinaryMask BinaryMask::like(const Volume& v) {
  BinaryMask m;
  m.dims = v.dims;
  m.spacing = v.spacing;
  m.origin = v.origin;
  m.bits.assign(v.size(), 0);
  return m;
}

BinaryMask BinaryMask::like(const BinaryMask& src) {
  BinaryMask m;
  m.dims = src.dims;
  m.spacing = src.spacing;
  m.origin = src.origin;
  m.bits.assign(src.bits.size(), 0);
  return m;
}

std::vector<double> Histogram::normalized() const {
  std::vector<double> p(counts.size(), 0.0);
  if (total == 0) return p;
  for (std::size_t i = 0; i < counts.size(); ++i)
    p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return p;
}

namespace {

std::string raw_path_for(const std::string& header_path) { return header_path + ".raw"; }

}  // namespace

void save_volume(const Volume& v, const std::string& path) {
  v.validate();
  std::ofstream hdr(path);
  if (!hdr) throw std::runtime_error("save_volume: cannot open " + path);
  hdr << "dims " << v.dims.x() << " " << v.dims.y() << " " << v.dims.z() << "\n";
  hdr.precision(17);
  hdr << "spacing_mm " << v.spacing.x() << " " << v.spacing.y() << " " << v.spacing.z() << "\n";
  hdr << "origin_mm " << v.origin.x() << " " << v.origin.y() << " " << v.origin.z() << "\n";
  hdr << "dtype f32le\n";
  hdr << "data " << std::filesystem::path(raw_path_for(path)).filename().string() << "\n";
  if (!hdr) throw std::runtime_error("save_volume: header write failed");
  hdr.close();

  std::ofstream raw(raw_path_for(path), std::ios::binary);
  if (!raw) throw std::runtime_error("save_volume: cannot open " + raw_path_for(path));
  raw.write(reinterpret_cast<const char*>(v.voxels.data()),
            static_cast<std::streamsize>(v.voxels.size() * sizeof(float)));
  if (!raw) throw std::runtime_error("save_volume: payload write failed");
}

Volume load_volume(const std::string& path) {
  std::ifstream hdr(path);
  if (!hdr) throw std::runtime_error("load_volume: cannot open " + path);
  Volume v;
  std::string data_name;
  bool have_dims = false, have_dtype = false;
  std::string line;
  while (std::getline(hdr, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key.empty() || key[0] == '#') continue;
    if (key == "dims") {
      ss >> v.dims.x() >> v.dims.y() >> v.dims.z();
      have_dims = true;
    } else if (key == "spacing_mm") {
      ss >> v.spacing.x() >> v.spacing.y() >> v.spacing.z();
    } else if (key == "origin_mm") {
      ss >> v.origin.x() >> v.origin.y() >> v.origin.z();
    } else if (key == "dtype") {
      std::string t;
      ss >> t;
      if (t != "f32le") throw std::runtime_error("load_volume: unsupported dtype " + t);
      have_dtype = true;
    } else if (key == "data") {
      ss >> data_name;
    } else {
      throw std::runtime_error("load_volume: malformed header key '" + key + "'");
    }
    if (ss.fail()) throw std::runtime_error("load_volume: malformed header line: " + line);
  }
  if (!have_dims || !have_dtype) throw std::runtime_error("load_volume: incomplete header");
  if (v.dims.minCoeff() <= 0) throw std::runtime_error("load_volume: non-positive dims");
  if (v.spacing.minCoeff() <= 0.0) throw std::runtime_error("load_volume: non-positive spacing");

  std::filesystem::path raw_file = data_name.empty()
                                       ? std::filesystem::path(raw_path_for(path))
                                       : std::filesystem::path(path).parent_path() / data_name;
  std::ifstream raw(raw_file, std::ios::binary);
  if (!raw) throw std::runtime_error("load_volume: cannot open payload " + raw_file.string());
  raw.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(raw.tellg());
  raw.seekg(0, std::ios::beg);
  const std::size_t n = static_cast<std::size_t>(v.dims.x()) * v.dims.y() * v.dims.z();
  if (bytes != n * sizeof(float))
    throw std::runtime_error("load_volume: payload size mismatch (" + std::to_string(bytes) +
                             " bytes for " + std::to_string(n) + " voxels)");
  v.voxels.resize(n);
  raw.read(reinterpret_cast<char*>(v.voxels.data()), static_cast<std::streamsize>(bytes));
  if (!raw) throw std::runtime_error("load_volume: payload read failed");
  v.validate();
  return v;
}

Eigen::Vector3d world_from_index(const Volume& v, const Eigen::Vector3i& idx) {
  if (!v.in_bounds(idx.x(), idx.y(), idx.z()))
    throw std::out_of_range("world_from_index: index out of range");
  return v.origin + idx.cast<double>().cwiseProduct(v.spacing);
}

Eigen::Vector3d world_from_index(const BinaryMask& m, const Eigen::Vector3i& idx) {
  if (!m.in_bounds(idx.x(), idx.y(), idx.z()))
    throw std::out_of_range("world_from_index: index out of range");
  return m.origin + idx.cast<double>().cwiseProduct(m.spacing);
}

double sample_trilinear(const Volume& v, const Eigen::Vector3d& p) {
  const Eigen::Vector3d g = (p - v.origin).cwiseQuotient(v.spacing);
  for (int a = 0; a < 3; ++a)
    if (!(g[a] >= 0.0 && g[a] <= static_cast<double>(v.dims[a] - 1))) return kOutsideValue;
  int i0 = static_cast<int>(std::floor(g.x()));
  int j0 = static_cast<int>(std::floor(g.y()));
  int k0 = static_cast<int>(std::floor(g.z()));
  i0 = std::min(i0, v.dims.x() - 2 >= 0 ? v.dims.x() - 2 : 0);
  j0 = std::min(j0, v.dims.y() - 2 >= 0 ? v.dims.y() - 2 : 0);
  k0 = std::min(k0, v.dims.z() - 2 >= 0 ? v.dims.z() - 2 : 0);
  const double fx = g.x() - i0, fy = g.y() - j0, fz = g.z() - k0;
  const int i1 = std::min(i0 + 1, v.dims.x() - 1);
  const int j1 = std::min(j0 + 1, v.dims.y() - 1);
  const int k1 = std::min(k0 + 1, v.dims.z() - 1);
  const double c000 = v.at(i0, j0, k0), c100 = v.at(i1, j0, k0);
  const double c010 = v.at(i0, j1, k0), c110 = v.at(i1, j1, k0);
  const double c001 = v.at(i0, j0, k1), c101 = v.at(i1, j0, k1);
  const double c011 = v.at(i0, j1, k1), c111 = v.at(i1, j1, k1);
  const double c00 = c000 * (1 - fx) + c100 * fx;
  const double c10 = c010 * (1 - fx) + c110 * fx;
  const double c01 = c001 * (1 - fx) + c101 * fx;
  const double c11 = c011 * (1 - fx) + c111 * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

BinaryMask threshold_segment(const Volume& v, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("threshold_segment: lo must be < hi");
  BinaryMask m = BinaryMask::like(v);
  for (std::size_t i = 0; i < v.voxels.size(); ++i)
    m.bits[i] = (v.voxels[i] >= lo && v.voxels[i] <= hi) ? 1 : 0;
  return m;
}

Histogram histogram(const Volume& v, const BinaryMask& m, int bins, double lo, double hi) {
  if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
  if (!(lo < hi)) throw std::invalid_argument("histogram: lo must be < hi");
  if (m.dims != v.dims) throw std::invalid_argument("histogram: mask grid mismatch");
  if (m.count() == 0) throw std::invalid_argument("histogram: empty mask");
  Histogram h;
  h.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.bin_edges[b] = lo + (hi - lo) * b / bins;
  h.counts.assign(bins, 0);
  const double scale = bins / (hi - lo);
  for (std::size_t i = 0; i < v.voxels.size(); ++i) {
    if (!m.bits[i]) continue;
    int b = static_cast<int>(std::floor((v.voxels[i] - lo) * scale));
    b = std::clamp(b, 0, bins - 1);  // out-of-range values clamp to end bins
    ++h.counts[b];
    ++h.total;
  }
  return h;
}

Volume add_gaussian_noise(const Volume& v, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("add_gaussian_noise: fraction must be in [0,1]");
  if (fraction == 0.0) return v;
  const double sigma = fraction * static_cast<double>(v.max_value());
  Volume out = v;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& x : out.voxels) x = static_cast<float>(x + dist(rng));
  return out;
}

BinaryMask dilate(const BinaryMask& m, int r) {
  if (r <= 0) return m;
  // Separable dilation along each axis.
  BinaryMask cur = m;
  for (int axis = 0; axis < 3; ++axis) {
    BinaryMask next = BinaryMask::like(m);
    const int nx = m.dims.x(), ny = m.dims.y(), nz = m.dims.z();
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          bool v = false;
          for (int d = -r; d <= r && !v; ++d) {
            int ii = i + (axis == 0 ? d : 0);
            int jj = j + (axis == 1 ? d : 0);
            int kk = k + (axis == 2 ? d : 0);
            if (cur.in_bounds(ii, jj, kk) && cur.get(ii, jj, kk)) v = true;
          }
          next.bits[next.linear(i, j, k)] = v ? 1 : 0;
        }
    cur = std::move(next);
  }
  return cur;
}

Volume median_filter3(const Volume& v) {
  Volume out = v;
  const int nx = v.dims.x(), ny = v.dims.y(), nz = v.dims.z();
  std::array<float, 27> window;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        int n = 0;
        for (int dk = -1; dk <= 1; ++dk)
          for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
              const int ii = std::clamp(i + di, 0, nx - 1);
              const int jj = std::clamp(j + dj, 0, ny - 1);
              const int kk = std::clamp(k + dk, 0, nz - 1);
              window[n++] = v.at(ii, jj, kk);
            }
        std::nth_element(window.begin(), window.begin() + 13, window.begin() + n);
        out.at(i, j, k) = window[13];
      }
  return out;
}

Volume gaussian_blur(const Volume& v, double sigma_mm) {
  if (sigma_mm <= 0.0) throw std::invalid_argument("gaussian_blur: sigma must be positive");
  Volume out = v;
  Volume tmp = v;
  const int n[3] = {v.dims.x(), v.dims.y(), v.dims.z()};
  // separable 1D passes; strides select the axis within the linear layout
  const std::size_t stride[3] = {1, static_cast<std::size_t>(n[0]),
                                 static_cast<std::size_t>(n[0]) * n[1]};
  for (int axis = 0; axis < 3; ++axis) {
    const double sigma_vox = sigma_mm / v.spacing[axis];
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_vox)));
    std::vector<double> kernel(2 * radius + 1);
    double norm = 0.0;
    for (int t = -radius; t <= radius; ++t) {
      kernel[t + radius] = std::exp(-0.5 * (t / sigma_vox) * (t / sigma_vox));
      norm += kernel[t + radius];
    }
    for (double& w : kernel) w /= norm;
    const Volume& src = axis == 1 ? tmp : out;
    Volume& dst = axis == 1 ? out : tmp;
    for (int k = 0; k < n[2]; ++k)
      for (int j = 0; j < n[1]; ++j)
        for (int i = 0; i < n[0]; ++i) {
          const int pos[3] = {i, j, k};
          double acc = 0.0;
          for (int t = -radius; t <= radius; ++t) {
            const int c = std::clamp(pos[axis] + t, 0, n[axis] - 1);
            acc += kernel[t + radius] *
                   src.voxels[src.linear(i, j, k) + (c - pos[axis]) * stride[axis]];
          }
          dst.voxels[dst.linear(i, j, k)] = static_cast<float>(acc);
        }
  }
  return tmp;  // passes run out->tmp, tmp->out, out->tmp
}

std::pair<std::vector<int>, int> connected_components_3d(const BinaryMask& m) {
  const int nx = m.dims.x(), ny = m.dims.y(), nz = m.dims.z();
  std::vector<int> label(m.bits.size(), -1);
  int next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < m.bits.size(); ++s) {
    if (!m.bits[s] || label[s] >= 0) continue;
    label[s] = next;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(cur % nx);
      const int j = static_cast<int>((cur / nx) % ny);
      const int k = static_cast<int>(cur / (static_cast<std::size_t>(nx) * ny));
      for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0 && dk == 0) continue;
            const int ii = i + di, jj = j + dj, kk = k + dk;
            if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny || kk >= nz) continue;
            const std::size_t t = m.linear(ii, jj, kk);
            if (m.bits[t] && label[t] < 0) {
              label[t] = next;
              stack.push_back(t);
            }
          }
    }
    ++next;
  }
  return {std::move(label), next};
}

}  // namespace symplane
