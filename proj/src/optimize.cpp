#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace survbench::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double eval(const Objective& f, std::span<const double> x) {
  const double v = f(x);
  return std::isfinite(v) ? v : kInf;
}

std::vector<double> numeric_gradient(const Objective& f, std::vector<double> x) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    const double keep = x[i];
    x[i] = keep + h;
    const double up = eval(f, x);
    x[i] = keep - h;
    const double down = eval(f, x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace

OptimResult nelder_mead(const Objective& f, std::vector<double> x0, std::vector<double> step,
                        const OptimOptions& options) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step[i];
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(f, simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);

  auto point = [&](const std::vector<double>& from, double coef, std::vector<double>& out) {
    for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + coef * (from[j] - centroid[j]);
  };

  OptimResult result;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[n - 1];

    if (std::isfinite(values[best]) &&
        values[worst] - values[best] <=
            options.rel_tol * (std::abs(values[best]) + options.rel_tol)) {
      result.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& v = simplex[order[k]];
      for (std::size_t j = 0; j < n; ++j) centroid[j] += v[j] / static_cast<double>(n);
    }

    point(simplex[worst], -1.0, trial);
    const double f_reflect = eval(f, trial);
    if (f_reflect < values[best]) {
      point(simplex[worst], -2.0, trial2);
      const double f_expand = eval(f, trial2);
      if (f_expand < f_reflect) {
        simplex[worst] = trial2;
        values[worst] = f_expand;
      } else {
        simplex[worst] = trial;
        values[worst] = f_reflect;
      }
      continue;
    }
    if (f_reflect < values[second_worst]) {
      simplex[worst] = trial;
      values[worst] = f_reflect;
      continue;
    }
    bool shrink = false;
    if (f_reflect < values[worst]) {
      point(simplex[worst], -0.5, trial2);
      const double f_contract = eval(f, trial2);
      if (f_contract <= f_reflect) {
        simplex[worst] = trial2;
        values[worst] = f_contract;
      } else {
        shrink = true;
      }
    } else {
      point(simplex[worst], 0.5, trial2);
      const double f_contract = eval(f, trial2);
      if (f_contract < values[worst]) {
        simplex[worst] = trial2;
        values[worst] = f_contract;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      const auto anchor = simplex[best];
      for (std::size_t k = 0; k <= n; ++k) {
        if (k == best) continue;
        for (std::size_t j = 0; j < n; ++j) {
          simplex[k][j] = anchor[j] + 0.5 * (simplex[k][j] - anchor[j]);
        }
        values[k] = eval(f, simplex[k]);
      }
    }
  }

  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());
  result.x = simplex[best];
  result.value = values[best];
  result.iterations = iter;
  return result;
}

OptimResult bfgs(const Objective& f, std::vector<double> x0, const OptimOptions& options) {
  const std::size_t n = x0.size();
  std::vector<double> x = std::move(x0);
  double fx = eval(f, x);
  OptimResult result;
  if (!std::isfinite(fx)) {
    result.x = x;
    result.value = fx;
    return result;
  }
  std::vector<double> h_inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) h_inv[i * n + i] = 1.0;
  std::vector<double> g = numeric_gradient(f, x);

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    std::vector<double> dir(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) dir[i] -= h_inv[i * n + j] * g[j];
    }
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += g[i] * dir[i];
    if (slope >= 0.0) {
      // Lost descent: restart from steepest descent.
      std::fill(h_inv.begin(), h_inv.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        h_inv[i * n + i] = 1.0;
        dir[i] = -g[i];
      }
      slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope += g[i] * dir[i];
      if (slope >= 0.0) {
        result.converged = true;
        break;
      }
    }

    double alpha = 1.0;
    std::vector<double> x_new(n);
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + alpha * dir[i];
      f_new = eval(f, x_new);
      if (f_new <= fx + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      result.converged = true;  // no further decrease representable
      break;
    }
    const double f_old = fx;
    std::vector<double> g_new = numeric_gradient(f, x_new);
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - x[i];
      y[i] = g_new[i] - g[i];
    }
    x = std::move(x_new);
    fx = f_new;
    g = std::move(g_new);

    if (std::abs(f_old - fx) <= options.rel_tol * (std::abs(fx) + options.rel_tol)) {
      result.converged = true;
      ++iter;
      break;
    }

    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) sy += s[i] * y[i];
    if (sy > 1e-300) {
      std::vector<double> hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) hy[i] += h_inv[i * n + j] * y[j];
      }
      double yhy = 0.0;
      for (std::size_t i = 0; i < n; ++i) yhy += y[i] * hy[i];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          h_inv[i * n + j] += ((sy + yhy) * s[i] * s[j]) / (sy * sy) -
                              (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
      }
    }
  }
  result.x = x;
  result.value = fx;
  result.iterations = iter;
  return result;
}

}  // namespace survbench::detail
