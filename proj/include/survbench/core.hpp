#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace survbench {

/// One right-censored record: observed time (months) and whether the event
/// was observed (true) or the record was censored (false).
struct Observation {
  double time = 0.0;
  bool event = false;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Latent event and censoring times of one subject, before observation.
struct LatentPair {
  double event_time = 0.0;
  double censoring_time = 0.0;
};

/// Reduces a latent pair to what is observed. A tie between event and
/// censoring time counts as censored.
Observation observe(const LatentPair& pair) noexcept;

/// Checks the Observation invariants (finite, non-negative time).
void validate(const Observation& obs);

class ArmData {
 public:
  ArmData(std::string label, std::vector<Observation> observations);

  const std::string& label() const noexcept { return label_; }
  const std::vector<Observation>& observations() const noexcept {
    return observations_;
  }
  std::size_t size() const noexcept { return observations_.size(); }
  std::size_t event_count() const noexcept;

  friend bool operator==(const ArmData&, const ArmData&) = default;

 private:
  std::string label_;
  std::vector<Observation> observations_;
};

/// A two-arm study. Arm order is significant: arm(0) is the first arm in
/// the source file and is the reference order for every between-arm
/// statistic.
class StudyDataset {
 public:
  StudyDataset(std::string study_id, ArmData first, ArmData second);

  const std::string& study_id() const noexcept { return study_id_; }
  const std::array<ArmData, 2>& arms() const noexcept { return arms_; }
  const ArmData& arm(std::size_t i) const { return arms_.at(i); }
  std::size_t size() const noexcept { return arms_[0].size() + arms_[1].size(); }

  friend bool operator==(const StudyDataset&, const StudyDataset&) = default;

 private:
  std::string study_id_;
  std::array<ArmData, 2> arms_;
};

enum class CurveClass { crossing, non_crossing, non_crossing_late_effect };

std::string to_string(CurveClass c);
CurveClass curve_class_from_string(const std::string& s);

/// Published reference values of a study.
struct StudyMetadata {
  std::string study_id;
  double reported_logrank_p = 1.0;
  std::optional<double> reported_hazard_ratio;
  std::map<std::string, std::optional<double>> reported_medians;
  CurveClass curve_class = CurveClass::non_crossing;

  void validate() const;
  friend bool operator==(const StudyMetadata&, const StudyMetadata&) = default;
};

struct KmStep {
  double time = 0.0;
  std::size_t at_risk = 0;
  std::size_t events = 0;
  double survival = 1.0;
};

/// Product-limit step function; S(t) = 1 before the first step.
class KmCurve {
 public:
  KmCurve() = default;
  explicit KmCurve(std::vector<KmStep> steps);

  const std::vector<KmStep>& steps() const noexcept { return steps_; }
  bool empty() const noexcept { return steps_.empty(); }

  /// Right-continuous evaluation S(t).
  double survival_at(double t) const noexcept;
  double final_survival() const noexcept {
    return steps_.empty() ? 1.0 : steps_.back().survival;
  }

 private:
  std::vector<KmStep> steps_;
};

/// Product-limit estimator over raw observations. With
/// `censoring_as_event` the roles of events and censorings are swapped,
/// which estimates the censoring survival function.
KmCurve product_limit(std::span<const Observation> observations,
                      bool censoring_as_event = false);

KmCurve km_estimate(const ArmData& arm);

/// Smallest step time with S <= 0.5; nullopt when S never reaches 0.5.
std::optional<double> median_survival(const KmCurve& curve);

/// Dataset CSV (`arm,time,status`). Arms are taken in order of first
/// appearance. The study id defaults to the file stem.
StudyDataset load_dataset(const std::filesystem::path& path,
                          std::optional<std::string> study_id = std::nullopt);
StudyDataset parse_dataset_csv(const std::string& text, std::string study_id);
void store_dataset(const StudyDataset& dataset, const std::filesystem::path& path);
std::string format_dataset_csv(const StudyDataset& dataset);

StudyMetadata load_metadata(const std::filesystem::path& path);
StudyMetadata parse_metadata_json(const std::string& text);
void store_metadata(const StudyMetadata& metadata, const std::filesystem::path& path);
std::string format_metadata_json(const StudyMetadata& metadata);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace survbench
