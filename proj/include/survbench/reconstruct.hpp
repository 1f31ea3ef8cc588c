#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "survbench/core.hpp"

namespace survbench {

struct CurvePoint {
  double time = 0.0;
  double survival = 1.0;
};

struct RiskRow {
  double time = 0.0;
  std::size_t at_risk = 0;
};

/// Digitized KM curve of one arm plus its published number-at-risk table.
struct DigitizedArm {
  std::string label;
  std::vector<CurvePoint> coordinates;
  std::vector<RiskRow> risk_table;
  std::optional<std::size_t> total_events;
};

struct RiskRowCheck {
  double time = 0.0;
  std::size_t target = 0;
  std::size_t achieved = 0;
};

struct ArmReconstructionReport {
  std::string label;
  /// max |S_digitized(t) - S_reconstructed(t)| over the digitized points.
  double max_survival_deviation = 0.0;
  std::vector<RiskRowCheck> risk_rows;
  std::size_t achieved_events = 0;
  /// nullopt when no total was supplied ("unconstrained").
  std::optional<std::size_t> target_events;
  std::size_t iterations = 0;
  bool converged = true;
};

struct ReconstructionReport {
  std::vector<ArmReconstructionReport> arms;
};

inline constexpr std::size_t kReconstructionIterationCap = 1000;

/// Rebuilds individual records from a digitized curve and its risk table.
///
/// Within each risk-table interval the censoring count starts from the gap
/// between the curve-implied survivors and the published number at risk,
/// censorings are spread evenly across the interval, events are assigned at
/// each digitized point so the product-limit estimate follows the curve, and
/// the censoring count is adjusted until the next row's number at risk is
/// met. After the last row, censoring continues at the average earlier rate
/// and, when total_events is given, is recalibrated to hit that total.
///
/// Throws Errc::structure for malformed input and Errc::infeasible when the
/// risk table cannot be reconciled with the curve.
std::pair<ArmData, ArmReconstructionReport> reconstruct_arm(const DigitizedArm& arm);

std::pair<StudyDataset, ReconstructionReport> reconstruct_study(const DigitizedArm& first,
                                                                const DigitizedArm& second,
                                                                std::string study_id);

/// `time,survival` CSV.
std::vector<CurvePoint> load_coordinates(const std::filesystem::path& path);
std::vector<CurvePoint> parse_coordinates_csv(const std::string& text);
/// `time,n_risk` CSV.
std::vector<RiskRow> load_risk_table(const std::filesystem::path& path);
std::vector<RiskRow> parse_risk_table_csv(const std::string& text);
/// meta.json with {"total_events": {"<label>": <int|null>, ...}}.
std::map<std::string, std::optional<std::size_t>> load_total_events(
    const std::filesystem::path& path);

std::string to_json(const ReconstructionReport& report);

}  // namespace survbench
