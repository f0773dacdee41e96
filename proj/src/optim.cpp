#include "symplane/optim.hpp"

#include <algorithm>
#include <cmath>

namespace symplane {

namespace {

Eigen::VectorXd clamp_box(Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  for (int a = 0; a < x.size(); ++a) x[a] = std::clamp(x[a], lo[a], hi[a]);
  return x;
}

}  // namespace

OptimResult minimize_quadratic_trust_region(const CostFunction& f, const Eigen::VectorXd& x0,
                                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                            int max_iter, double initial_radius_frac,
                                            double radius_tol_frac, double max_radius_frac) {
  const int n = static_cast<int>(x0.size());
  const Eigen::VectorXd span = (hi - lo).cwiseMax(1e-12);
  Eigen::VectorXd x = clamp_box(x0, lo, hi);
  double fx = f(x);
  double rho = initial_radius_frac;

  OptimResult res;
  res.trace.push_back(fx);
  int iter = 0;
  while (iter < max_iter && rho > radius_tol_frac) {
    ++iter;
    Eigen::VectorXd best_x = x;
    double best_f = fx;

    Eigen::VectorXd grad(n), hess(n), dp(n), dm(n);
    for (int a = 0; a < n; ++a) {
      const double step = rho * span[a];
      dp[a] = std::min(step, hi[a] - x[a]);
      dm[a] = std::min(step, x[a] - lo[a]);
      double fp = fx, fm = fx;
      if (dp[a] > 1e-14) {
        Eigen::VectorXd xp = x;
        xp[a] += dp[a];
        fp = f(xp);
        if (fp < best_f) {
          best_f = fp;
          best_x = xp;
        }
      }
      if (dm[a] > 1e-14) {
        Eigen::VectorXd xm = x;
        xm[a] -= dm[a];
        fm = f(xm);
        if (fm < best_f) {
          best_f = fm;
          best_x = xm;
        }
      }
      if (dp[a] > 1e-14 && dm[a] > 1e-14) {
        const double denom = dp[a] * dm[a] * (dp[a] + dm[a]);
        grad[a] = (fp * dm[a] * dm[a] - fm * dp[a] * dp[a] + fx * (dp[a] * dp[a] - dm[a] * dm[a])) /
                  denom;
        hess[a] = 2.0 * (fp * dm[a] + fm * dp[a] - fx * (dp[a] + dm[a])) / denom;
      } else if (dp[a] > 1e-14) {
        grad[a] = (fp - fx) / dp[a];
        hess[a] = 0.0;
      } else if (dm[a] > 1e-14) {
        grad[a] = (fx - fm) / dm[a];
        hess[a] = 0.0;
      } else {
        grad[a] = hess[a] = 0.0;
      }
    }

    // separable quadratic model minimized within the trust region and bounds
    Eigen::VectorXd xq = x;
    for (int a = 0; a < n; ++a) {
      const double r = rho * span[a];
      double s;
      if (hess[a] > 1e-14)
        s = std::clamp(-grad[a] / hess[a], -r, r);
      else
        s = grad[a] > 0.0 ? -r : (grad[a] < 0.0 ? r : 0.0);
      xq[a] = std::clamp(x[a] + s, lo[a], hi[a]);
    }
    bool model_won = false;
    if ((xq - x).norm() > 1e-14) {
      const double fq = f(xq);
      if (fq < best_f) {
        best_f = fq;
        best_x = xq;
        model_won = true;
      }
    }

    if (best_f < fx - 1e-15 * std::max(1.0, std::abs(fx))) {
      x = best_x;
      fx = best_f;
      if (model_won) rho = std::min(rho * 1.4, max_radius_frac);
    } else {
      rho *= 0.5;
    }
    res.trace.push_back(fx);
  }
  res.x = x;
  res.f = fx;
  res.iterations = iter;
  res.converged = rho <= radius_tol_frac;
  return res;
}

OptimResult minimize_nelder_mead(const CostFunction& f, const Eigen::VectorXd& x0,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 int max_iter) {
  const int n = static_cast<int>(x0.size());
  const Eigen::VectorXd span = (hi - lo).cwiseMax(1e-12);
  std::vector<Eigen::VectorXd> pts(n + 1, clamp_box(x0, lo, hi));
  for (int a = 0; a < n; ++a) {
    const double step = 0.1 * span[a];
    pts[a + 1][a] = pts[a + 1][a] + step <= hi[a] ? pts[a + 1][a] + step : pts[a + 1][a] - step;
  }
  std::vector<double> fv(n + 1);
  for (int i = 0; i <= n; ++i) fv[i] = f(pts[i]);

  OptimResult res;
  auto order = [&]() {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    std::vector<Eigen::VectorXd> p2(n + 1);
    std::vector<double> f2(n + 1);
    for (int i = 0; i <= n; ++i) {
      p2[i] = pts[idx[i]];
      f2[i] = fv[idx[i]];
    }
    pts = std::move(p2);
    fv = std::move(f2);
  };
  order();
  res.trace.push_back(fv[0]);

  int iter = 0;
  while (iter < max_iter) {
    ++iter;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[i];
    centroid /= n;

    const Eigen::VectorXd xr = clamp_box(centroid + (centroid - pts[n]), lo, hi);
    const double fr = f(xr);
    if (fr < fv[0]) {
      const Eigen::VectorXd xe = clamp_box(centroid + 2.0 * (centroid - pts[n]), lo, hi);
      const double fe = f(xe);
      if (fe < fr) {
        pts[n] = xe;
        fv[n] = fe;
      } else {
        pts[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      pts[n] = xr;
      fv[n] = fr;
    } else {
      const Eigen::VectorXd xc = clamp_box(centroid + 0.5 * (pts[n] - centroid), lo, hi);
      const double fc = f(xc);
      if (fc < fv[n]) {
        pts[n] = xc;
        fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          pts[i] = clamp_box(pts[0] + 0.5 * (pts[i] - pts[0]), lo, hi);
          fv[i] = f(pts[i]);
        }
      }
    }
    order();
    res.trace.push_back(fv[0]);
    double spread = 0.0;
    for (int i = 1; i <= n; ++i) spread = std::max(spread, (pts[i] - pts[0]).norm());
    if (spread < 1e-7) {
      res.converged = true;
      break;
    }
  }
  res.x = pts[0];
  res.f = fv[0];
  res.iterations = iter;
  return res;
}

}  // namespace symplane
