#include "symplane/refine.hpp"

#include "symplane/optim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace symplane {

void TukeyConfig::validate() const {
  if (c <= 0.0) throw std::invalid_argument("tukey: c must be positive");
  if (mad_floor <= 0.0) throw std::invalid_argument("tukey: mad_floor must be positive");
}

void NmiConfig::validate() const {
  if (bins < 2) throw std::invalid_argument("nmi: need >= 2 bins");
  if (!(lo < hi)) throw std::invalid_argument("nmi: lo must be < hi");
}

void RefineConfig::validate() const {
  if (lambda < 0.0) throw std::invalid_argument("refine: lambda must be >= 0");
  if (angle_bound <= 0.0 || offset_bound <= 0.0)
    throw std::invalid_argument("refine: bounds must be positive");
  if (max_iter < 1) throw std::invalid_argument("refine: max_iter must be >= 1");
  if (coarse_sigma < 0.0) throw std::invalid_argument("refine: coarse_sigma must be >= 0");
  if (max_samples < 1) throw std::invalid_argument("refine: max_samples must be >= 1");
  tukey.validate();
  nmi.validate();
}

std::string CostReport::to_json() const {
  nlohmann::json j;
  j["d_I"] = d_I;
  j["d_D"] = d_D;
  j["lambda"] = lambda;
  j["total"] = total;
  j["S"] = S;
  j["inlier_fraction"] = inlier_fraction;
  j["iterations"] = iterations;
  j["trace"] = trace;
  return j.dump(2);
}

void save_cost_report(const CostReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_cost_report: cannot open " + path);
  f << r.to_json() << "\n";
}

namespace {

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (n % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

}  // namespace

std::vector<double> residuals(const Volume& v, const ReflectionMap& m, const BinaryMask& domain) {
  std::vector<double> r;
  r.reserve(domain.count());
  for (int k = 0; k < domain.dims.z(); ++k)
    for (int j = 0; j < domain.dims.y(); ++j)
      for (int i = 0; i < domain.dims.x(); ++i) {
        if (!domain.get(i, j, k)) continue;
        const Eigen::Vector3d p = world_from_index(domain, {i, j, k});
        r.push_back(static_cast<double>(v.at(i, j, k)) - sample_trilinear(v, m.apply(p)));
      }
  if (r.empty()) throw std::invalid_argument("residuals: empty domain");
  return r;
}

double mad_scale(std::vector<double> r, double mad_floor) {
  if (r.empty()) throw std::invalid_argument("mad_scale: empty residuals");
  const double med = median_inplace(r);
  for (double& x : r) x = std::abs(x - med);
  const double mad = median_inplace(r);
  return std::max(mad_floor, mad / 0.6745);
}

double tukey_rho(double e, double c) {
  if (std::abs(e) > c) return 0.0;
  const double u = 1.0 - (e / c) * (e / c);
  return e * u * u;
}

double tukey_cost(double e, double c) {
  // integral of |tukey_rho|: saturates at c^2/6 instead of redescending to 0,
  // so suppressed outliers stop contributing but are never rewarded
  if (std::abs(e) > c) return c * c / 6.0;
  const double u = 1.0 - (e / c) * (e / c);
  return c * c / 6.0 * (1.0 - u * u * u);
}

RobustLoss tukey_loss(const Volume& v, const ReflectionMap& m, const BinaryMask& domain,
                      const TukeyConfig& cfg) {
  cfg.validate();
  const std::vector<double> r = residuals(v, m, domain);
  RobustLoss out;
  out.S = cfg.fixed_scale > 0.0 ? cfg.fixed_scale : mad_scale(r, cfg.mad_floor);
  std::size_t inliers = 0;
  double acc = 0.0;
  for (double ri : r) {
    const double e = ri / out.S;
    acc += tukey_cost(e, cfg.c);
    if (std::abs(e) <= cfg.c) ++inliers;
  }
  out.d_I = acc / static_cast<double>(r.size());
  out.inlier_fraction = static_cast<double>(inliers) / static_cast<double>(r.size());
  return out;
}

double nmi_from_pairs(const std::vector<double>& x, const std::vector<double>& y,
                      const NmiConfig& cfg) {
  cfg.validate();
  if (x.empty() || x.size() != y.size())
    throw std::invalid_argument("nmi_from_pairs: need equal-length non-empty samples");
  const int b = cfg.bins;
  const double scale = b / (cfg.hi - cfg.lo);
  auto bin_of = [&](double v) {
    return std::clamp(static_cast<int>((v - cfg.lo) * scale), 0, b - 1);
  };
  std::vector<double> joint(static_cast<std::size_t>(b) * b, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    joint[static_cast<std::size_t>(bin_of(x[i])) * b + bin_of(y[i])] += 1.0;

  const double n = static_cast<double>(x.size());
  std::vector<double> px(b, 0.0), py(b, 0.0);
  double hxy = 0.0;
  for (int ix = 0; ix < b; ++ix)
    for (int iy = 0; iy < b; ++iy) {
      const double p = joint[static_cast<std::size_t>(ix) * b + iy] / n;
      if (p <= 0.0) continue;
      px[ix] += p;
      py[iy] += p;
      hxy -= p * std::log(p);
    }
  double hx = 0.0, hy = 0.0;
  for (int i = 0; i < b; ++i) {
    if (px[i] > 0.0) hx -= px[i] * std::log(px[i]);
    if (py[i] > 0.0) hy -= py[i] * std::log(py[i]);
  }
  if (hxy < 1e-12) return -2.0;  // both sides constant: perfectly matched
  return -(hx + hy) / hxy;
}

double nmi_loss(const Volume& v, const ReflectionMap& m, const SymmetryPlane& plane,
                const BinaryMask& bone, const NmiConfig& cfg) {
  // one histogram per half-space: X = intensities on that side, Y = the
  // mirrored opposite side sampled at the same points. Averaging the two
  // one-sided terms makes d_D invariant under flipping the plane normal and
  // cancels the first-order bias a one-sided fragment would otherwise induce.
  // Both sides are sampled at a fixed quarter-voxel offset so they see the
  // same interpolation smoothing; sampling X on the lattice would otherwise
  // favor lattice-aligned planes, whose mirror samples are exact, over
  // off-lattice ones, whose mirror samples are smoothed.
  const Eigen::Vector3d off = 0.25 * v.spacing;
  std::vector<double> xp, yp, xn, yn;
  for (int k = 0; k < bone.dims.z(); ++k)
    for (int j = 0; j < bone.dims.y(); ++j)
      for (int i = 0; i < bone.dims.x(); ++i) {
        if (!bone.get(i, j, k)) continue;
        const Eigen::Vector3d c = world_from_index(bone, {i, j, k});
        const Eigen::Vector3d p = c + off;
        const bool positive = plane.signed_distance(c) > 0.0;
        auto& x = positive ? xp : xn;
        auto& y = positive ? yp : yn;
        x.push_back(sample_trilinear(v, p));
        y.push_back(sample_trilinear(v, m.apply(p)));
      }
  if (xp.empty() || xn.empty())
    throw std::invalid_argument("nmi_loss: a half-space holds no masked voxels");
  return 0.5 * (nmi_from_pairs(xp, yp, cfg) + nmi_from_pairs(xn, yn, cfg));
}

BinaryMask evaluation_domain(const Volume& v, const RefineConfig& cfg) {
  cfg.validate();
  BinaryMask bone =
      threshold_segment(v, cfg.bone_threshold, std::numeric_limits<double>::infinity());
  BinaryMask domain = dilate(bone, cfg.dilate_radius);
  const std::size_t n = domain.count();
  if (n > cfg.max_samples) {
    const std::size_t stride = (n + cfg.max_samples - 1) / cfg.max_samples;
    std::size_t seen = 0;
    for (std::uint8_t& bit : domain.bits) {
      if (bit == 0) continue;
      if (seen++ % stride != 0) bit = 0;
    }
  }
  return domain;
}

CostReport total_cost(const Volume& v, const PlaneParams& params, const BinaryMask& domain,
                      const BinaryMask& bone, const RefineConfig& cfg) {
  cfg.validate();
  const SymmetryPlane plane = params.to_plane();
  const ReflectionMap m = reflection_from_plane(plane);
  CostReport rep;
  if (cfg.robust) {
    const RobustLoss loss = tukey_loss(v, m, domain, cfg.tukey);
    rep.d_I = loss.d_I;
    rep.S = loss.S;
    rep.inlier_fraction = loss.inlier_fraction;
  } else {
    const std::vector<double> r = residuals(v, m, domain);
    rep.S = cfg.tukey.fixed_scale > 0.0 ? cfg.tukey.fixed_scale
                                        : mad_scale(r, cfg.tukey.mad_floor);
    double acc = 0.0;
    for (double ri : r) acc += (ri / rep.S) * (ri / rep.S);
    rep.d_I = acc / static_cast<double>(r.size());
    rep.inlier_fraction = 1.0;
  }
  rep.d_D = cfg.lambda > 0.0 ? nmi_loss(v, m, plane, bone, cfg.nmi) : 0.0;
  rep.lambda = cfg.lambda;
  rep.total = rep.d_I + cfg.lambda * rep.d_D;
  return rep;
}

RefineResult optimize_plane(const Volume& v, const SymmetryPlane& init, const RefineConfig& cfg) {
  cfg.validate();
  const BinaryMask bone =
      threshold_segment(v, cfg.bone_threshold, std::numeric_limits<double>::infinity());
  const BinaryMask domain = evaluation_domain(v, cfg);

  // Freeze the robust scale at a given plane so d_I stays comparable across
  // candidate planes (see TukeyConfig::fixed_scale). On noise-free data the
  // MAD collapses to the floor and every structural residual saturates,
  // flattening the cost; keep at least 90% of the residuals inside the
  // cutoff so a descent direction exists.
  const auto freeze_scale = [&](const Volume& vol, const PlaneParams& p, bool widen) {
    const ReflectionMap m = reflection_from_plane(p.to_plane());
    std::vector<double> r = residuals(vol, m, domain);
    const double mad = mad_scale(r, cfg.tukey.mad_floor);
    if (!widen) return std::max(mad, 25.0);
    for (double& x : r) x = std::abs(x);
    const std::size_t q = static_cast<std::size_t>(0.9 * (r.size() - 1));
    std::nth_element(r.begin(), r.begin() + q, r.end());
    return std::max(mad, r[q] / cfg.tukey.c);
  };

  const PlaneParams p0 = PlaneParams::from_plane(init.canonicalized());
  const Eigen::Vector3d x0 = p0.as_vector();
  Eigen::VectorXd lo(3), hi(3);
  lo << x0.x() - cfg.angle_bound, x0.y() - cfg.angle_bound, x0.z() - cfg.offset_bound;
  hi << x0.x() + cfg.angle_bound, x0.y() + cfg.angle_bound, x0.z() + cfg.offset_bound;

  const auto run_stage = [&](const Volume& vol, const PlaneParams& from, int iters, bool widen) {
    RefineConfig run = cfg;
    if (run.tukey.fixed_scale <= 0.0) run.tukey.fixed_scale = freeze_scale(vol, from, widen);
    const CostFunction f = [&](const Eigen::VectorXd& x) {
      PlaneParams p;
      p.alpha = x[0];
      p.beta = x[1];
      p.d = x[2];
      try {
        return total_cost(vol, p, domain, bone, run).total;
      } catch (const std::invalid_argument&) {
        return 1e9;  // plane left the masked anatomy; reject the step
      }
    };
    // the suppressed data term flattens for planes far from the anatomy, so a
    // large probe can tunnel over the basin wall; keep the trust region small
    return cfg.use_nelder_mead
               ? minimize_nelder_mead(f, from.as_vector(), lo, hi, iters)
               : minimize_quadratic_trust_region(f, from.as_vector(), lo, hi, iters, 0.02, 1e-4,
                                                 0.05);
  };

  // Coarse-to-fine: smoothing widens the intensity ramps around bone, which
  // stretches the attraction basin far enough to capture inits near the edge
  // of the bounds. The widened scale needed for that capture keeps part of
  // any outlier structure inside the cutoff, which biases its minimum by a
  // few degrees, while the tight plain-MAD polish scale suppresses outliers
  // fully but has a narrow basin. No single anneal schedule dominates, so a
  // few schedules run and the final tight objective arbitrates between them.
  int iters_used = 0;
  std::vector<double> trace;
  const auto advance = [&](const Volume& vol, const PlaneParams& from, int iters, bool widen) {
    const OptimResult opt = run_stage(vol, from, iters, widen);
    PlaneParams p;
    p.alpha = opt.x[0];
    p.beta = opt.x[1];
    p.d = opt.x[2];
    iters_used += opt.iterations;
    trace.insert(trace.end(), opt.trace.begin(), opt.trace.end());
    return p;
  };

  // Blur pyramid; at each level a widened-scale capture run pulls the plane
  // into the level's basin, then a tight-scale polish run removes the bias
  // the widened scale admits, while that level's basin is still wide.
  std::vector<double> sigmas;
  for (double s = cfg.coarse_sigma; s >= 1.0; s *= 0.5) sigmas.push_back(s);
  PlaneParams cur = p0;
  std::vector<PlaneParams> candidates{p0};
  for (double s : sigmas) {
    const Volume level = gaussian_blur(v, s);
    cur = advance(level, cur, cfg.max_iter, true);
    cur = advance(level, cur, cfg.max_iter, false);
    candidates.push_back(cur);
  }
  cur = advance(v, cur, cfg.max_iter, true);
  candidates.push_back(cur);
  cur = advance(v, cur, cfg.max_iter, false);
  candidates.push_back(cur);

  // arbitration under the common tight objective
  RefineConfig fine = cfg;
  if (fine.tukey.fixed_scale <= 0.0) fine.tukey.fixed_scale = freeze_scale(v, cur, false);
  PlaneParams best = p0;
  double best_total = std::numeric_limits<double>::infinity();
  const auto arbitrate = [&](const std::vector<PlaneParams>& cand) {
    for (const PlaneParams& p : cand) {
      double t;
      try {
        t = total_cost(v, p, domain, bone, fine).total;
      } catch (const std::invalid_argument&) {
        continue;
      }
      if (t < best_total) {
        best_total = t;
        best = p;
      }
    }
  };
  arbitrate(candidates);

  // A dominant outlier structure can pair with its own mirror image and trap
  // every schedule in the same nearby local minimum; polished restarts a few
  // degrees/millimetres around the winner escape it, and the arbitration
  // keeps whichever basin truly scores lower.
  std::vector<PlaneParams> restarts;
  const double da = 4.0 * M_PI / 180.0, dd = 4.0;
  for (int axis = 0; axis < 3; ++axis)
    for (int sign = -1; sign <= 1; sign += 2) {
      PlaneParams p = best;
      if (axis == 0) p.alpha += sign * da;
      if (axis == 1) p.beta += sign * da;
      if (axis == 2) p.d += sign * dd;
      restarts.push_back(advance(v, p, cfg.max_iter, false));
    }
  arbitrate(restarts);
  RefineResult res;
  res.plane = best.to_plane().canonicalized();
  res.report = total_cost(v, best, domain, bone, fine);
  if (cfg.lambda == 0.0) {
    // total_cost skips the regularizer at lambda 0; still report it here as a
    // diagnostic of the converged plane
    try {
      res.report.d_D = nmi_loss(v, reflection_from_plane(res.plane), res.plane, bone, fine.nmi);
    } catch (const std::invalid_argument&) {
      // converged plane misses the masked anatomy; leave d_D at 0
    }
  }
  res.report.iterations = iters_used;
  res.report.trace = std::move(trace);
  return res;
}

BinaryMask outlier_mask(const Volume& v, const ReflectionMap& m, const BinaryMask& domain,
                        const TukeyConfig& cfg, int min_blob) {
  cfg.validate();
  const std::vector<double> r = residuals(v, m, domain);
  const double S = mad_scale(r, cfg.mad_floor);

  BinaryMask out = BinaryMask::like(domain);
  out.bits.assign(domain.bits.size(), 0);
  std::size_t t = 0;
  for (std::size_t idx = 0; idx < domain.bits.size(); ++idx) {
    if (domain.bits[idx] == 0) continue;
    if (std::abs(r[t] / S) > cfg.c) out.bits[idx] = 1;
    ++t;
  }

  auto [labels, n_labels] = connected_components_3d(out);
  if (n_labels > 0) {
    std::vector<int> sizes(n_labels, 0);
    for (int l : labels)
      if (l >= 0) ++sizes[l];
    for (std::size_t idx = 0; idx < out.bits.size(); ++idx)
      if (out.bits[idx] != 0 && sizes[labels[idx]] < min_blob) out.bits[idx] = 0;
  }
  return out;
}

}  // namespace symplane
