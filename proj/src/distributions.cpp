#include "survbench/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include "math_policy.hpp"
#include "optimize.hpp"
#include "survbench/core.hpp"
#include "survbench/error.hpp"

namespace survbench {

using detail::kEulerGamma;
using detail::kLnSqrt2Pi;
using detail::kPi;
using detail::kSqrt2;
using detail::MathPolicy;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLnMixWeibull = -1.6094379124341003;  // log(0.2)
constexpr double kLnMixNormal = -0.22314355131420976;  // log(0.8)

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double normal_quantile(double p) {
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p, MathPolicy());
}

double normal_log_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - kLnSqrt2Pi - std::log(sd);
}

double weibull_log_pdf(double x, double shape, double scale) {
  if (x < 0.0) return -kInf;
  if (x == 0.0) {
    if (shape < 1.0) return kInf;
    if (shape == 1.0) return -std::log(scale);
    return -kInf;
  }
  const double lz = std::log(x / scale);
  return std::log(shape / scale) + (shape - 1.0) * lz - std::exp(shape * lz);
}

double weibull_cdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return -std::expm1(-std::pow(x / scale, shape));
}

double weibull_quantile(double p, double shape, double scale) {
  return scale * std::pow(-std::log1p(-p), 1.0 / shape);
}

// log(1 + exp(v)) without overflow.
double softplus(double v) { return v > 30.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double gamma_draw(double shape, RandomStream& rng) {
  if (shape < 1.0) {
    const double u = rng.uniform_open();
    return gamma_draw(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    const double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

void require(bool ok, Family family, const char* what) {
  if (!ok) {
    throw Error(Errc::domain, std::string(family_name(family)) + ": " + what);
  }
}

}  // namespace

std::string_view family_name(Family family) noexcept {
  switch (family) {
    case Family::exponential: return "exponential";
    case Family::weibull: return "weibull";
    case Family::gamma: return "gamma";
    case Family::log_normal: return "log-normal";
    case Family::inverse_gamma: return "inverse-gamma";
    case Family::log_logistic: return "log-logistic";
    case Family::gompertz: return "gompertz";
    case Family::normal: return "normal";
    case Family::cauchy: return "cauchy";
    case Family::gumbel: return "gumbel";
    case Family::weibull_normal_mixture: return "weibull-normal-mixture";
  }
  return "unknown";
}

Family family_from_name(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  throw Error(Errc::parse, "unknown distribution family '" + std::string(name) + "'");
}

std::size_t parameter_count(Family family) noexcept {
  switch (family) {
    case Family::exponential: return 1;
    case Family::weibull_normal_mixture: return 4;
    default: return 2;
  }
}

bool positive_support(Family family) noexcept {
  switch (family) {
    case Family::normal:
    case Family::cauchy:
    case Family::gumbel:
    case Family::weibull_normal_mixture:
      return false;
    default:
      return true;
  }
}

Distribution::Distribution(Family family, std::vector<double> parameters)
    : family_(family), params_(std::move(parameters)) {
  if (params_.size() != parameter_count(family_)) {
    throw Error(Errc::domain, std::string(family_name(family_)) + ": expected " +
                                  std::to_string(parameter_count(family_)) + " parameters, got " +
                                  std::to_string(params_.size()));
  }
  for (double v : params_) require(std::isfinite(v), family_, "parameters must be finite");
  const auto& p = params_;
  switch (family_) {
    case Family::exponential:
      require(p[0] > 0.0, family_, "rate must be > 0");
      break;
    case Family::log_normal:
    case Family::normal:
    case Family::cauchy:
    case Family::gumbel:
      require(p[1] > 0.0, family_, "scale must be > 0");
      break;
    case Family::weibull_normal_mixture:
      require(p[0] > 0.0 && p[1] > 0.0, family_, "weibull shape and scale must be > 0");
      require(p[3] > 0.0, family_, "normal sd must be > 0");
      break;
    default:
      require(p[0] > 0.0 && p[1] > 0.0, family_, "parameters must be > 0");
      break;
  }
}

double Distribution::log_pdf(double x) const noexcept {
  const auto& p = params_;
  switch (family_) {
    case Family::exponential:
      return x < 0.0 ? -kInf : std::log(p[0]) - p[0] * x;
    case Family::weibull:
      return weibull_log_pdf(x, p[0], p[1]);
    case Family::gamma: {
      if (x < 0.0) return -kInf;
      if (x == 0.0) {
        if (p[0] < 1.0) return kInf;
        if (p[0] == 1.0) return std::log(p[1]);
        return -kInf;
      }
      return p[0] * std::log(p[1]) + (p[0] - 1.0) * std::log(x) - p[1] * x -
             boost::math::lgamma(p[0], MathPolicy());
    }
    case Family::log_normal: {
      if (x <= 0.0) return -kInf;
      const double lx = std::log(x);
      return normal_log_pdf(lx, p[0], p[1]) - lx;
    }
    case Family::inverse_gamma: {
      if (x <= 0.0) return -kInf;
      return p[0] * std::log(p[1]) - boost::math::lgamma(p[0], MathPolicy()) -
             (p[0] + 1.0) * std::log(x) - p[1] / x;
    }
    case Family::log_logistic: {
      if (x < 0.0) return -kInf;
      if (x == 0.0) {
        if (p[0] < 1.0) return kInf;
        if (p[0] == 1.0) return -std::log(p[1]);
        return -kInf;
      }
      const double lz = std::log(x / p[1]);
      return std::log(p[0] / p[1]) + (p[0] - 1.0) * lz - 2.0 * softplus(p[0] * lz);
    }
    case Family::gompertz: {
      if (x < 0.0) return -kInf;
      return std::log(p[1]) + p[0] * x - (p[1] / p[0]) * std::expm1(p[0] * x);
    }
    case Family::normal:
      return normal_log_pdf(x, p[0], p[1]);
    case Family::cauchy: {
      const double z = (x - p[0]) / p[1];
      return -std::log(kPi * p[1]) - std::log1p(z * z);
    }
    case Family::gumbel: {
      const double z = (x - p[0]) / p[1];
      return -std::log(p[1]) - z - std::exp(-z);
    }
    case Family::weibull_normal_mixture:
      return log_sum_exp(kLnMixWeibull + weibull_log_pdf(x, p[0], p[1]),
                         kLnMixNormal + normal_log_pdf(x, p[2], p[3]));
  }
  return kNaN;
}

double Distribution::pdf(double x) const noexcept {
  if (family_ == Family::weibull_normal_mixture) {
    const auto& p = params_;
    return kMixtureWeibullWeight * std::exp(weibull_log_pdf(x, p[0], p[1])) +
           kMixtureNormalWeight * std::exp(normal_log_pdf(x, p[2], p[3]));
  }
  return std::exp(log_pdf(x));
}

double Distribution::cdf(double x) const noexcept {
  const auto& p = params_;
  if (std::isnan(x)) return kNaN;
  switch (family_) {
    case Family::exponential:
      return x <= 0.0 ? 0.0 : -std::expm1(-p[0] * x);
    case Family::weibull:
      return weibull_cdf(x, p[0], p[1]);
    case Family::gamma:
      if (x <= 0.0) return 0.0;
      if (x == kInf) return 1.0;
      return boost::math::gamma_p(p[0], p[1] * x, MathPolicy());
    case Family::log_normal:
      if (x <= 0.0) return 0.0;
      return normal_cdf((std::log(x) - p[0]) / p[1]);
    case Family::inverse_gamma:
      if (x <= 0.0) return 0.0;
      if (x == kInf) return 1.0;
      return boost::math::gamma_q(p[0], p[1] / x, MathPolicy());
    case Family::log_logistic:
      if (x <= 0.0) return 0.0;
      return 1.0 / (1.0 + std::pow(x / p[1], -p[0]));
    case Family::gompertz:
      if (x <= 0.0) return 0.0;
      return -std::expm1(-(p[1] / p[0]) * std::expm1(p[0] * x));
    case Family::normal:
      return normal_cdf((x - p[0]) / p[1]);
    case Family::cauchy:
      return 0.5 + std::atan((x - p[0]) / p[1]) / kPi;
    case Family::gumbel:
      return std::exp(-std::exp(-(x - p[0]) / p[1]));
    case Family::weibull_normal_mixture:
      return kMixtureWeibullWeight * weibull_cdf(x, p[0], p[1]) +
             kMixtureNormalWeight * normal_cdf((x - p[2]) / p[3]);
  }
  return kNaN;
}

double Distribution::quantile(double prob) const {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw Error(Errc::domain, "quantile: probability must lie in (0,1)");
  }
  const auto& p = params_;
  switch (family_) {
    case Family::exponential:
      return -std::log1p(-prob) / p[0];
    case Family::weibull:
      return weibull_quantile(prob, p[0], p[1]);
    case Family::gamma:
      return boost::math::gamma_p_inv(p[0], prob, MathPolicy()) / p[1];
    case Family::log_normal:
      return std::exp(p[0] + p[1] * normal_quantile(prob));
    case Family::inverse_gamma:
      return p[1] / boost::math::gamma_q_inv(p[0], prob, MathPolicy());
    case Family::log_logistic:
      return p[1] * std::pow(prob / (1.0 - prob), 1.0 / p[0]);
    case Family::gompertz:
      return std::log1p(-(p[0] / p[1]) * std::log1p(-prob)) / p[0];
    case Family::normal:
      return p[0] + p[1] * normal_quantile(prob);
    case Family::cauchy:
      return p[0] + p[1] * std::tan(kPi * (prob - 0.5));
    case Family::gumbel:
      return p[0] - p[1] * std::log(-std::log(prob));
    case Family::weibull_normal_mixture: {
      const double qw = weibull_quantile(prob, p[0], p[1]);
      const double qn = p[2] + p[3] * normal_quantile(prob);
      double lo = std::min(qw, qn);
      double hi = std::max(qw, qn);
      if (lo == hi) return lo;
      auto f = [&](double x) { return cdf(x) - prob; };
      std::uintmax_t max_iter = 200;
      auto [a, b] = boost::math::tools::toms748_solve(
          f, lo, hi, f(lo), f(hi), boost::math::tools::eps_tolerance<double>(52), max_iter,
          MathPolicy());
      return 0.5 * (a + b);
    }
  }
  return kNaN;
}

double Distribution::sample(RandomStream& rng) const {
  const auto& p = params_;
  switch (family_) {
    case Family::gamma:
      return gamma_draw(p[0], rng) / p[1];
    case Family::inverse_gamma:
      return p[1] / gamma_draw(p[0], rng);
    case Family::normal:
      return p[0] + p[1] * rng.normal();
    case Family::log_normal:
      return std::exp(p[0] + p[1] * rng.normal());
    case Family::weibull_normal_mixture:
      if (rng.uniform() < kMixtureWeibullWeight) {
        return weibull_quantile(rng.uniform_open(), p[0], p[1]);
      }
      return p[2] + p[3] * rng.normal();
    default:
      return quantile(rng.uniform_open());
  }
}

std::vector<double> Distribution::sample(std::size_t n, RandomStream& rng) const {
  std::vector<double> out(n);
  for (auto& v : out) v = sample(rng);
  return out;
}

double mixture_pdf(double shape, double scale, double mean, double sd, double x) {
  return Distribution(Family::weibull_normal_mixture, {shape, scale, mean, sd}).pdf(x);
}

double log_likelihood(const Distribution& dist, std::span<const double> sample) noexcept {
  double total = 0.0;
  for (double x : sample) {
    const double lp = dist.log_pdf(x);
    if (!std::isfinite(lp)) return std::isnan(lp) ? kNaN : (lp > 0 ? kInf : -kInf);
    total += lp;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Maximum-likelihood fitting

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;  // population (1/n) standard deviation
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

double type7_quantile(const std::vector<double>& sorted, double prob) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto k = static_cast<std::size_t>(std::floor(h));
  if (k + 1 >= sorted.size()) return sorted.back();
  return sorted[k] + (h - static_cast<double>(k)) * (sorted[k + 1] - sorted[k]);
}

Moments moments_of(std::span<const double> xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(ss / n);
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  m.median = type7_quantile(sorted, 0.5);
  m.q1 = type7_quantile(sorted, 0.25);
  m.q3 = type7_quantile(sorted, 0.75);
  return m;
}

Moments log_moments(std::span<const double> xs) {
  std::vector<double> logs(xs.size());
  std::transform(xs.begin(), xs.end(), logs.begin(), [](double x) { return std::log(x); });
  return moments_of(logs);
}

// Weibull (shape, scale) from mean and coefficient of variation.
std::pair<double, double> weibull_from_moments(double mean, double sd) {
  if (!(mean > 0.0)) return {1.0, std::max(std::abs(mean) + sd, 1e-3)};
  const double cv = sd > 0.0 ? sd / mean : 1.0;
  const double shape = std::clamp(std::pow(cv, -1.086), 0.05, 50.0);
  const double scale = mean / std::tgamma(1.0 + 1.0 / shape);
  return {shape, scale};
}

std::vector<double> moment_start(Family family, std::span<const double> xs) {
  const Moments m = moments_of(xs);
  const double var = m.sd * m.sd;
  switch (family) {
    case Family::exponential:
      return {1.0 / m.mean};
    case Family::weibull: {
      const Moments lm = log_moments(xs);
      const double shape = kPi / (lm.sd * std::sqrt(6.0));
      return {shape, std::exp(lm.mean + kEulerGamma / shape)};
    }
    case Family::gamma:
      return {m.mean * m.mean / var, m.mean / var};
    case Family::log_normal: {
      const Moments lm = log_moments(xs);
      return {lm.mean, lm.sd};
    }
    case Family::inverse_gamma: {
      const double shape = m.mean * m.mean / var + 2.0;
      return {shape, m.mean * (shape - 1.0)};
    }
    case Family::log_logistic: {
      const Moments lm = log_moments(xs);
      return {kPi / (lm.sd * std::sqrt(3.0)), std::exp(lm.mean)};
    }
    case Family::gompertz: {
      // Shape from the mean scale; rate from its profile-likelihood optimum.
      const double shape = 1.0 / std::max(m.mean, 1e-12);
      double denom = 0.0;
      for (double x : xs) denom += std::expm1(shape * x);
      return {shape, shape * static_cast<double>(xs.size()) / denom};
    }
    case Family::normal:
      return {m.mean, m.sd};
    case Family::cauchy: {
      const double half_iqr = 0.5 * (m.q3 - m.q1);
      return {m.median, half_iqr > 0.0 ? half_iqr : m.sd};
    }
    case Family::gumbel: {
      const double scale = m.sd * std::sqrt(6.0) / kPi;
      return {m.mean - kEulerGamma * scale, scale};
    }
    case Family::weibull_normal_mixture: {
      std::vector<double> lower, upper;
      for (double x : xs) (x <= m.median ? lower : upper).push_back(x);
      if (upper.empty()) upper = lower;
      const Moments lo = moments_of(lower);
      const Moments hi = moments_of(upper);
      auto [shape, scale] = weibull_from_moments(lo.mean, lo.sd);
      return {shape, scale, hi.mean, hi.sd > 0.0 ? hi.sd : m.sd};
    }
  }
  return {};
}

// Which coordinates are optimized on the log scale.
std::vector<bool> positive_mask(Family family) {
  switch (family) {
    case Family::log_normal:
    case Family::normal:
    case Family::cauchy:
    case Family::gumbel:
      return {false, true};
    case Family::weibull_normal_mixture:
      return {true, true, false, true};
    case Family::exponential:
      return {true};
    default:
      return {true, true};
  }
}

std::vector<double> to_free(const std::vector<double>& params, const std::vector<bool>& mask) {
  std::vector<double> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out[i] = mask[i] ? std::log(params[i]) : params[i];
  }
  return out;
}

std::vector<double> from_free(std::span<const double> free, const std::vector<bool>& mask) {
  std::vector<double> out(free.size());
  for (std::size_t i = 0; i < free.size(); ++i) out[i] = mask[i] ? std::exp(free[i]) : free[i];
  return out;
}

double params_log_likelihood(Family family, const std::vector<double>& params,
                             std::span<const double> xs) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!std::isfinite(params[i])) return -kInf;
  }
  try {
    const Distribution d(family, params);
    const double ll = log_likelihood(d, xs);
    return std::isnan(ll) ? -kInf : ll;
  } catch (const Error&) {
    return -kInf;
  }
}

struct RawFit {
  std::vector<double> params;
  bool converged = false;
};

// Newton-Raphson on the inverse-gamma score equation. With the rate
// profiled out (rate = shape / mean(1/x)) the shape solves
//   log(shape) - digamma(shape) = log(mean(1/x)) + mean(log x).
RawFit fit_inverse_gamma(std::span<const double> xs, std::vector<double> start) {
  const double n = static_cast<double>(xs.size());
  double mean_inv = 0.0, mean_log = 0.0;
  for (double x : xs) {
    mean_inv += 1.0 / x;
    mean_log += std::log(x);
  }
  mean_inv /= n;
  mean_log /= n;
  const double c = std::log(mean_inv) + mean_log;
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(Errc::fit_failure, "inverse-gamma: degenerate sample");
  }
  double shape = start[0];
  if (!(shape > 0.0) || !std::isfinite(shape)) shape = 0.5 / c;
  RawFit fit;
  for (int iter = 0; iter < 500; ++iter) {
    const double g = std::log(shape) - boost::math::digamma(shape, MathPolicy()) - c;
    const double dg = 1.0 / shape - boost::math::trigamma(shape, MathPolicy());
    double next = shape - g / dg;
    if (!(next > 0.0) || !std::isfinite(next)) next = 0.5 * shape;  // damping
    const bool done = std::abs(next - shape) <= 1e-10 * shape;
    shape = next;
    if (done) {
      fit.converged = true;
      break;
    }
  }
  fit.params = {shape, shape / mean_inv};
  return fit;
}

RawFit fit_with_optimizer(Family family, std::span<const double> xs,
                          const std::vector<double>& start) {
  const auto mask = positive_mask(family);
  auto objective = [&](std::span<const double> free) {
    return -params_log_likelihood(family, from_free(free, mask), xs);
  };
  const auto x0 = to_free(start, mask);
  detail::OptimResult res;
  if (family == Family::exponential) {
    res = detail::bfgs(objective, x0);
  } else {
    const Moments m = moments_of(xs);
    std::vector<double> step(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
      step[i] = mask[i] ? 0.1 : 0.1 * (m.sd > 0.0 ? m.sd : 1.0);
    }
    res = detail::nelder_mead(objective, x0, step);
  }
  return {from_free(res.x, mask), res.converged};
}

}  // namespace

FittedDistribution fit_mle(Family family, std::span<const double> sample) {
  const std::string name(family_name(family));
  if (sample.size() < 2) {
    throw Error(Errc::invalid_argument, name + ": fitting needs at least 2 observations");
  }
  for (double x : sample) {
    if (!std::isfinite(x)) throw Error(Errc::invalid_argument, name + ": sample is not finite");
    if (positive_support(family) && !(x > 0.0)) {
      throw Error(Errc::support, name + ": sample outside support (requires values > 0)");
    }
  }
  const auto [lo, hi] = std::minmax_element(sample.begin(), sample.end());
  if (*lo == *hi) throw Error(Errc::fit_failure, name + ": degenerate sample (all values equal)");

  std::vector<double> start = moment_start(family, sample);
  double start_ll = params_log_likelihood(family, start, sample);

  RawFit raw = family == Family::inverse_gamma ? fit_inverse_gamma(sample, start)
                                               : fit_with_optimizer(family, sample, start);
  double ll = params_log_likelihood(family, raw.params, sample);
  if (!(ll >= start_ll) && std::isfinite(start_ll)) {
    raw.params = start;
    ll = start_ll;
  }
  if (!std::isfinite(ll)) {
    throw Error(Errc::fit_failure, name + ": likelihood is not finite at any probed point");
  }
  Distribution dist(family, raw.params);
  const CvmResult cvm = cvm_test(sample, dist);
  return {std::move(dist), ll, cvm.statistic, cvm.p_value, raw.converged};
}

std::vector<CandidateFit> fit_candidates(std::span<const double> sample) {
  std::vector<CandidateFit> out;
  out.reserve(kAllFamilies.size());
  for (Family f : kAllFamilies) {
    CandidateFit c{f, std::nullopt, {}};
    try {
      c.fit = fit_mle(f, sample);
    } catch (const Error& e) {
      c.failure = e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

FittedDistribution select_distribution(std::span<const double> sample) {
  if (sample.size() < 5) {
    throw Error(Errc::invalid_argument, "distribution selection needs at least 5 observations");
  }
  auto candidates = fit_candidates(sample);
  const CandidateFit* best = nullptr;
  std::string failures;
  for (const auto& c : candidates) {
    if (!c.fit) {
      failures += "\n  " + c.failure;
      continue;
    }
    // p is strictly decreasing in W^2; the statistic settles ties where p
    // has saturated numerically. Remaining ties keep the earlier family.
    if (best == nullptr || c.fit->cvm_p_value > best->fit->cvm_p_value ||
        (c.fit->cvm_p_value == best->fit->cvm_p_value &&
         c.fit->cvm_statistic < best->fit->cvm_statistic)) {
      best = &c;
    }
  }
  if (best == nullptr) throw Error(Errc::selection, "no candidate family could be fitted:" + failures);
  return *best->fit;
}

std::string to_json(const FittedDistribution& fit) {
  nlohmann::json j;
  j["family"] = family_name(fit.family());
  j["parameters"] = fit.distribution.parameters();
  j["log_likelihood"] = fit.log_likelihood;
  j["cvm_statistic"] = fit.cvm_statistic;
  j["cvm_p_value"] = fit.cvm_p_value;
  j["converged"] = fit.converged;
  return j.dump();
}

}  // namespace survbench
