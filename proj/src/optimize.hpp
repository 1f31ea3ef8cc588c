#pragma once

#include <functional>
#include <span>
#include <vector>

namespace survbench::detail {

using Objective = std::function<double(std::span<const double>)>;

struct OptimOptions {
  int max_iterations = 500;
  double rel_tol = 1e-8;
};

struct OptimResult {
  std::vector<double> x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Derivative-free simplex minimization. Non-finite objective values are
/// treated as +inf. `step` gives the initial simplex edge per coordinate.
/// Stops when the spread of simplex values falls below
/// rel_tol * (|f_best| + rel_tol).
OptimResult nelder_mead(const Objective& f, std::vector<double> x0, std::vector<double> step,
                        const OptimOptions& options = {});

/// Quasi-Newton minimization with an inverse-Hessian BFGS update, central
/// finite-difference gradients and a backtracking Armijo line search.
OptimResult bfgs(const Objective& f, std::vector<double> x0, const OptimOptions& options = {});

}  // namespace survbench::detail
