#pragma once

#include <array>
#include <optional>
#include <string>

#include "survbench/core.hpp"

namespace survbench {

struct LogrankResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample logrank test with hypergeometric variance; p from the
/// chi-square law with one degree of freedom. Throws Errc::degenerate when
/// the total variance is zero.
LogrankResult logrank_test(const StudyDataset& dataset);

/// Upper tail of the chi-square law with one degree of freedom.
double chi_square1_sf(double x) noexcept;

enum class TieMethod { efron, breslow };

struct CoxOptions {
  TieMethod ties = TieMethod::efron;
  std::size_t max_iterations = 50;
};

struct CoxResult {
  double beta = 0.0;
  /// exp(beta); absent when the fit did not converge.
  std::optional<double> hazard_ratio;
  bool converged = false;
  std::size_t iterations = 0;
  double log_likelihood = 0.0;
  double score = 0.0;
};

/// Log partial likelihood with first and second derivatives in beta.
struct CoxPartial {
  double value = 0.0;
  double gradient = 0.0;
  double hessian = 0.0;
};

/// Covariate is 1 for the first arm and 0 for the second, so the hazard
/// ratio is the hazard of the first arm relative to the second.
CoxPartial cox_partial_likelihood(const StudyDataset& dataset, double beta,
                                  TieMethod ties = TieMethod::efron);

/// Damped Newton-Raphson from beta = 0. A diverging coefficient (monotone
/// likelihood) is reported as non-converged with no hazard ratio.
CoxResult cox_hazard_ratio(const StudyDataset& dataset, const CoxOptions& options = {});

/// Horizon for the restricted mean: the lower arm maximum when both arm
/// maxima are censored, otherwise the largest censoring time in the study
/// (or the largest time overall when nothing is censored).
double rmst_tau(const StudyDataset& dataset);

/// Area under the KM step function of `arm` on [0, tau].
double rmst(const ArmData& arm, double tau);

/// rmst(first arm) - rmst(second arm) at rmst_tau().
double rmstd(const StudyDataset& dataset);

/// Fraction of pooled observations whose time occurs more than once.
double tie_ratio(const StudyDataset& dataset);

struct EvaluationResult {
  std::optional<double> logrank_statistic;
  std::optional<double> logrank_p;
  std::optional<double> hazard_ratio;
  std::array<std::string, 2> arm_labels;
  std::array<std::optional<double>, 2> medians;
  double tau = 0.0;
  double rmst_first = 0.0;
  double rmst_second = 0.0;
  double rmstd = 0.0;
  double tie_ratio = 0.0;

  friend bool operator==(const EvaluationResult&, const EvaluationResult&) = default;
};

/// All statistics of one dataset. A degenerate logrank test or a
/// non-converged Cox fit leaves the corresponding fields empty.
EvaluationResult evaluate_dataset(const StudyDataset& dataset, const CoxOptions& cox = {});

std::string to_json(const EvaluationResult& result);

}  // namespace survbench
