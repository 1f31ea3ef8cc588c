#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "survbench/core.hpp"
#include "survbench/distributions.hpp"
#include "survbench/random.hpp"

namespace survbench {

enum class EngineKind { parametric, kde, case_resampling, conditional_bootstrap };

inline constexpr std::array<EngineKind, 4> kAllEngines = {
    EngineKind::parametric, EngineKind::kde, EngineKind::case_resampling,
    EngineKind::conditional_bootstrap};

/// "parametric", "kde", "case-resampling", "conditional-bootstrap".
std::string_view engine_name(EngineKind engine) noexcept;
/// Short names used on the command line: "parametric", "kde", "case", "condboot".
std::string_view engine_short_name(EngineKind engine) noexcept;
/// Accepts either the long or the short name.
EngineKind engine_from_name(std::string_view name);

/// Observed event and censoring times of an arm, in input order.
struct ObservedSubsets {
  std::vector<double> event_times;
  std::vector<double> censoring_times;
};

ObservedSubsets split_subsets(const ArmData& arm);

/// Gaussian kernel density estimate restricted to a closed domain.
struct KdeDensity {
  std::vector<double> support_sample;
  double bandwidth = 1.0;
  double lower = 0.0;
  double upper = 1.0;
  double envelope = 1.0;

  /// Unrestricted estimate (1/(n h)) sum phi((x - x_i) / h).
  double density(double x) const noexcept;
  /// Integral of density() over (-inf, x].
  double cumulative(double x) const noexcept;
};

inline constexpr std::size_t kKdeEnvelopeGrid = 1024;
inline constexpr double kKdeEnvelopeSafety = 1.01;

/// Silverman's rule 0.9 min(sd, IQR/1.34) n^(-1/5), IQR from type-7
/// quantiles; falls back to sd when the IQR is zero.
double silverman_bandwidth(std::span<const double> sample);

/// Fits the estimate. A positive `bandwidth` overrides Silverman's rule and
/// then a single support point is allowed.
KdeDensity kde_fit(std::span<const double> sample, std::optional<double> bandwidth = std::nullopt);

/// Accept-reject sampling: x ~ U(domain), u ~ U(0,1), accept when
/// u * envelope < f(x).
std::vector<double> kde_sample(const KdeDensity& density, std::size_t n, RandomStream& rng);

/// Product-limit estimate of the censoring distribution, as a step CDF with
/// atoms at the distinct censoring times.
struct CensoringDistribution {
  std::vector<double> atoms;
  std::vector<double> cdf;

  double at(double t) const noexcept;
  /// Probability mass of the atom at atoms[k].
  double mass(std::size_t k) const noexcept;
};

CensoringDistribution censoring_km(const ArmData& arm);

struct ParametricArmState {
  FittedDistribution event;
  /// Absent when the arm has no censored observations: no censoring.
  std::optional<FittedDistribution> censoring;
};

struct KdeArmState {
  KdeDensity event;
  std::optional<KdeDensity> censoring;
};

struct CaseResamplingArmState {
  ArmData source;
};

struct ConditionalBootstrapArmState {
  ArmData source;
  CensoringDistribution censoring;
};

class ArmModel {
 public:
  using State = std::variant<ParametricArmState, KdeArmState, CaseResamplingArmState,
                             ConditionalBootstrapArmState>;

  ArmModel(std::string label, std::size_t source_size, State state);

  EngineKind engine() const noexcept;
  const std::string& label() const noexcept { return label_; }
  std::size_t source_size() const noexcept { return source_size_; }
  const State& state() const noexcept { return state_; }

 private:
  std::string label_;
  std::size_t source_size_;
  State state_;
};

ArmModel build_model(EngineKind engine, const ArmData& arm);

/// n_out tuples drawn uniformly with replacement from the source arm.
ArmData case_resample(const ArmModel& model, std::size_t n_out, RandomStream& rng);

/// Latent (event, censoring) pairs of one conditional-bootstrap replicate,
/// in source order. Censoring times are drawn first, then event times.
std::vector<LatentPair> conditional_bootstrap_latent(const ArmModel& model, RandomStream& rng);
ArmData conditional_bootstrap(const ArmModel& model, RandomStream& rng);

ArmData simulate(const ArmModel& model, std::size_t n_out, RandomStream& rng);

struct StudyModel {
  std::string study_id;
  EngineKind engine;
  std::array<ArmModel, 2> arms;
};

StudyModel build_study_model(EngineKind engine, const StudyDataset& dataset);

/// Simulates both arms, each from its own substream of `rng`. Sizes default
/// to the source arm sizes.
StudyDataset simulate_study(const StudyModel& model, RandomStream& rng,
                            std::optional<std::size_t> n_per_arm = std::nullopt);

/// Fitted families or bandwidths per arm and subset.
std::string model_summary_json(const StudyModel& model);

}  // namespace survbench
