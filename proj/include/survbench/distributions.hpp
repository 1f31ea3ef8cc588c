#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "survbench/random.hpp"

namespace survbench {

/// Candidate families, in canonical order. The order breaks ties in
/// select_distribution(), so do not reorder.
enum class Family {
  exponential,
  weibull,
  gamma,
  log_normal,
  inverse_gamma,
  log_logistic,
  gompertz,
  normal,
  cauchy,
  gumbel,
  weibull_normal_mixture,
};

inline constexpr std::array<Family, 11> kAllFamilies = {
    Family::exponential,  Family::weibull,      Family::gamma,
    Family::log_normal,   Family::inverse_gamma, Family::log_logistic,
    Family::gompertz,     Family::normal,       Family::cauchy,
    Family::gumbel,       Family::weibull_normal_mixture};

std::string_view family_name(Family family) noexcept;
Family family_from_name(std::string_view name);
std::size_t parameter_count(Family family) noexcept;
/// True for families supported on the positive half-line only; fitting them
/// requires a strictly positive sample.
bool positive_support(Family family) noexcept;

/// Weights of the weibull-normal mixture. They are fixed, not parameters.
inline constexpr double kMixtureWeibullWeight = 0.2;
inline constexpr double kMixtureNormalWeight = 0.8;

/// A parametric family with concrete parameters.
///
/// Parameterizations:
///   exponential(rate)                 weibull(shape, scale)
///   gamma(shape, rate)                log_normal(meanlog, sdlog)
///   inverse_gamma(shape, rate)        log_logistic(shape, scale)
///   gompertz(shape a, rate b)         hazard b*exp(a*t)
///   normal(mean, sd)                  cauchy(location, scale)
///   gumbel(location, scale)           maximum (right-skewed) form
///   weibull_normal_mixture(shape, scale, mean, sd)
///       0.2 * weibull(shape, scale) + 0.8 * normal(mean, sd)
///
/// The constructor rejects out-of-domain parameters with Errc::domain.
class Distribution {
 public:
  Distribution(Family family, std::vector<double> parameters);

  Family family() const noexcept { return family_; }
  const std::vector<double>& parameters() const noexcept { return params_; }

  double log_pdf(double x) const noexcept;
  double pdf(double x) const noexcept;
  double cdf(double x) const noexcept;
  /// Generalized inverse of cdf(); p must lie in (0, 1).
  double quantile(double p) const;
  double sample(RandomStream& rng) const;
  std::vector<double> sample(std::size_t n, RandomStream& rng) const;

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  Family family_;
  std::vector<double> params_;
};

/// Density of the fixed-weight weibull-normal mixture.
double mixture_pdf(double shape, double scale, double mean, double sd, double x);

struct CvmResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Cramer-von Mises statistic
///   W^2 = 1/(12n) + sum_i ((2i-1)/(2n) - F(x_(i)))^2
/// with the p-value from the asymptotic null distribution of W^2.
CvmResult cvm_test(std::span<const double> sample, const Distribution& dist);

/// Asymptotic null distribution of W^2: P(W^2 > w).
double cvm_asymptotic_sf(double w);

struct FittedDistribution {
  Distribution distribution;
  double log_likelihood = 0.0;
  double cvm_statistic = 0.0;
  double cvm_p_value = 1.0;
  bool converged = false;

  Family family() const noexcept { return distribution.family(); }
};

/// Maximum-likelihood fit of one family to a complete (uncensored) sample,
/// scored with cvm_test() at the fitted parameters.
///
/// Optimizers: quasi-Newton for the exponential, Newton-Raphson on the
/// score equation for the inverse gamma, Nelder-Mead for every other
/// family. All start from method-of-moments estimates.
FittedDistribution fit_mle(Family family, std::span<const double> sample);

struct CandidateFit {
  Family family;
  std::optional<FittedDistribution> fit;
  std::string failure;
};

/// Fits every candidate family; failures are recorded, not thrown.
std::vector<CandidateFit> fit_candidates(std::span<const double> sample);

/// Returns the candidate with the highest CVM p-value. Equal p-values are
/// ranked by the smaller statistic, then by the order of kAllFamilies.
FittedDistribution select_distribution(std::span<const double> sample);

/// Total sample log-likelihood under `dist`.
double log_likelihood(const Distribution& dist, std::span<const double> sample) noexcept;

std::string to_json(const FittedDistribution& fit);

}  // namespace survbench
