#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace symplane {

using CostFunction = std::function<double(const Eigen::VectorXd&)>;

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;            // radius shrank below tolerance
  std::vector<double> trace;         // best value after each iteration
};

/// Bound-constrained derivative-free minimization with a quadratic surrogate:
/// per-iteration coordinate stencil, separable quadratic model, trust-region
/// step with accept/shrink control. Deterministic.
OptimResult minimize_quadratic_trust_region(const CostFunction& f, const Eigen::VectorXd& x0,
                                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                            int max_iter = 100, double initial_radius_frac = 0.1,
                                            double radius_tol_frac = 1e-4,
                                            double max_radius_frac = 0.5);

/// Deterministic Nelder-Mead with bound clamping; fallback optimizer.
OptimResult minimize_nelder_mead(const CostFunction& f, const Eigen::VectorXd& x0,
                                 const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                 int max_iter = 100);

}  // namespace symplane
