#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "survbench/core.hpp"
#include "survbench/engines.hpp"
#include "survbench/evaluate.hpp"

namespace survbench {

struct BenchmarkStudy {
  StudyDataset dataset;
  StudyMetadata metadata;
  /// Statistics of the reconstructed dataset itself; the RMSTD reference.
  EvaluationResult reference;
};

/// Pairs a dataset with its published values and computes the reference.
BenchmarkStudy make_benchmark_study(StudyDataset dataset, StudyMetadata metadata);

/// Metadata whose "reported" values are the dataset's own statistics, for
/// studies that serve as their own reference.
StudyMetadata metadata_from_evaluation(const std::string& study_id, const EvaluationResult& result);

struct BenchmarkConfig {
  std::vector<BenchmarkStudy> studies;
  std::vector<EngineKind> engines;
  std::size_t iterations = 10000;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_directory;
  /// Worker threads; 0 uses the hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
};

/// bench.json: {"studies": [{"dataset": "...", "metadata": "..."}],
/// "engines": [...], "iterations": N, "seed": S, "threads": T}. Relative
/// paths resolve against the config file's directory.
BenchmarkConfig load_benchmark_config(const std::filesystem::path& path);

enum class Metric {
  logrank_p,
  hazard_ratio,
  median_first,
  median_second,
  rmstd,
  tie_ratio,
  logrank_statistic,
};

inline constexpr std::array<Metric, 7> kAllMetrics = {
    Metric::logrank_p, Metric::hazard_ratio, Metric::median_first, Metric::median_second,
    Metric::rmstd,     Metric::tie_ratio,    Metric::logrank_statistic};

/// "logrank_p", "hazard_ratio", "median_arm1", "median_arm2", "rmstd",
/// "tie_ratio", "logrank_statistic".
std::string_view metric_name(Metric metric) noexcept;
/// True for metrics stored as simulated minus reference; tie_ratio and
/// logrank_statistic are stored as raw values.
bool metric_is_difference(Metric metric) noexcept;

/// Per-iteration values of every metric for one (study, engine) pair.
/// An empty optional marks an undefined value.
struct MetricDiffs {
  std::string study_id;
  EngineKind engine = EngineKind::parametric;
  std::array<std::vector<std::optional<double>>, kAllMetrics.size()> values;

  const std::vector<std::optional<double>>& operator[](Metric m) const {
    return values[static_cast<std::size_t>(m)];
  }
  std::vector<double> defined(Metric m) const;
  std::size_t undefined_count(Metric m) const;
};

/// Simulate wall time per iteration, first iteration excluded.
struct RuntimeRecord {
  std::string study_id;
  EngineKind engine = EngineKind::parametric;
  std::vector<double> seconds;
};

struct SkippedPair {
  std::string study_id;
  EngineKind engine = EngineKind::parametric;
  std::string reason;
};

struct BenchmarkResult {
  std::size_t iterations = 0;
  std::vector<MetricDiffs> diffs;
  std::vector<RuntimeRecord> runtimes;
  std::vector<SkippedPair> skipped;
};

BenchmarkResult run_benchmark(const BenchmarkConfig& config);

struct SixNumberSummary {
  double minimum = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double q3 = 0.0;
  double maximum = 0.0;
};

/// Type-7 quartiles and the arithmetic mean. Throws Errc::summary on an
/// empty input.
SixNumberSummary summarize(std::span<const double> values);

/// Runtime summaries pooled across studies, per engine.
std::map<EngineKind, SixNumberSummary> runtime_stats(std::span<const RuntimeRecord> records);

/// Writes summary_<metric>.csv, long_<metric>.csv, runtimes.csv,
/// summary_runtime.csv and report.json into `outdir`.
void emit_reports(const BenchmarkConfig& config, const BenchmarkResult& result,
                  const std::filesystem::path& outdir);

}  // namespace survbench
