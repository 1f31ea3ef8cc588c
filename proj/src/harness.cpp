#include "survbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "quantile.hpp"
#include "survbench/error.hpp"

namespace survbench {

namespace {

using nlohmann::json;

std::optional<double> diff(const std::optional<double>& sim, const std::optional<double>& ref) {
  if (!sim || !ref) return std::nullopt;
  return *sim - *ref;
}

std::optional<double> reported_median(const StudyMetadata& meta, const std::string& label) {
  auto it = meta.reported_medians.find(label);
  return it == meta.reported_medians.end() ? std::nullopt : it->second;
}

struct Pair {
  std::size_t study;
  EngineKind engine;
  StudyModel model;
};

json summary_json(const SixNumberSummary& s) {
  return json{{"min", s.minimum}, {"q1", s.q1},     {"median", s.median},
              {"mean", s.mean},   {"q3", s.q3},     {"max", s.maximum}};
}

std::string summary_fields(const std::optional<SixNumberSummary>& s) {
  if (!s) return "NA,NA,NA,NA,NA,NA";
  return format_double(s->minimum) + "," + format_double(s->q1) + "," + format_double(s->median) +
         "," + format_double(s->mean) + "," + format_double(s->q3) + "," + format_double(s->maximum);
}

std::optional<SixNumberSummary> maybe_summary(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return summarize(v);
}

}  // namespace

BenchmarkStudy make_benchmark_study(StudyDataset dataset, StudyMetadata metadata) {
  metadata.validate();
  EvaluationResult ref = evaluate_dataset(dataset);
  return BenchmarkStudy{std::move(dataset), std::move(metadata), std::move(ref)};
}

StudyMetadata metadata_from_evaluation(const std::string& study_id, const EvaluationResult& result) {
  StudyMetadata meta;
  meta.study_id = study_id;
  meta.reported_logrank_p = result.logrank_p.value_or(1.0);
  meta.reported_hazard_ratio = result.hazard_ratio;
  for (std::size_t a = 0; a < 2; ++a) meta.reported_medians[result.arm_labels[a]] = result.medians[a];
  return meta;
}

void BenchmarkConfig::validate() const {
  if (iterations < 1) throw Error(Errc::invalid_argument, "iterations must be at least 1");
  if (engines.empty()) throw Error(Errc::invalid_argument, "engine list is empty");
  if (studies.empty()) throw Error(Errc::invalid_argument, "study list is empty");
}

BenchmarkConfig load_benchmark_config(const std::filesystem::path& path) {
  BenchmarkConfig cfg;
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(Errc::parse, path.string() + ": " + e.what());
  }
  try {
    for (const auto& s : j.at("studies")) {
      const auto dataset_path = resolve(s.at("dataset").get<std::string>());
      StudyMetadata meta = load_metadata(resolve(s.at("metadata").get<std::string>()));
      StudyDataset data = load_dataset(dataset_path, meta.study_id);
      cfg.studies.push_back(make_benchmark_study(std::move(data), std::move(meta)));
    }
    if (j.contains("engines")) {
      for (const auto& e : j.at("engines")) cfg.engines.push_back(engine_from_name(e.get<std::string>()));
    } else {
      cfg.engines.assign(kAllEngines.begin(), kAllEngines.end());
    }
    cfg.iterations = j.value("iterations", std::size_t{10000});
    cfg.base_seed = j.value("seed", std::uint64_t{0});
    cfg.threads = j.value("threads", std::size_t{0});
  } catch (const json::exception& e) {
    throw Error(Errc::parse, path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string_view metric_name(Metric metric) noexcept {
  switch (metric) {
    case Metric::logrank_p: return "logrank_p";
    case Metric::hazard_ratio: return "hazard_ratio";
    case Metric::median_first: return "median_arm1";
    case Metric::median_second: return "median_arm2";
    case Metric::rmstd: return "rmstd";
    case Metric::tie_ratio: return "tie_ratio";
    case Metric::logrank_statistic: return "logrank_statistic";
  }
  return "unknown";
}

bool metric_is_difference(Metric metric) noexcept {
  return metric != Metric::tie_ratio && metric != Metric::logrank_statistic;
}

std::vector<double> MetricDiffs::defined(Metric m) const {
  std::vector<double> out;
  for (const auto& v : (*this)[m]) {
    if (v) out.push_back(*v);
  }
  return out;
}

std::size_t MetricDiffs::undefined_count(Metric m) const {
  const auto& v = (*this)[m];
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), std::nullopt));
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  BenchmarkResult result;
  result.iterations = config.iterations;

  std::vector<Pair> pairs;
  for (std::size_t s = 0; s < config.studies.size(); ++s) {
    const auto& study = config.studies[s];
    for (EngineKind engine : config.engines) {
      try {
        pairs.push_back({s, engine, build_study_model(engine, study.dataset)});
      } catch (const Error& e) {
        result.skipped.push_back({study.dataset.study_id(), engine, e.what()});
      }
    }
  }

  const std::size_t n_iter = config.iterations;
  result.diffs.resize(pairs.size());
  std::vector<std::vector<double>> seconds(pairs.size(), std::vector<double>(n_iter, 0.0));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    result.diffs[p].study_id = config.studies[pairs[p].study].dataset.study_id();
    result.diffs[p].engine = pairs[p].engine;
    for (auto& v : result.diffs[p].values) v.assign(n_iter, std::nullopt);
  }

  auto run_iteration = [&](std::size_t i) {
    const RandomStream iteration_stream(config.base_seed, i);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto& pair = pairs[p];
      const auto& study = config.studies[pair.study];
      RandomStream rng = iteration_stream.substream(
          (static_cast<std::uint64_t>(pair.study) << 8) | static_cast<std::uint64_t>(pair.engine));

      const auto start = std::chrono::steady_clock::now();
      const StudyDataset sim = simulate_study(pair.model, rng);
      const auto stop = std::chrono::steady_clock::now();
      seconds[p][i] = std::chrono::duration<double>(stop - start).count();

      const EvaluationResult ev = evaluate_dataset(sim);
      const auto& meta = study.metadata;
      auto& out = result.diffs[p].values;
      auto put = [&](Metric m, std::optional<double> v) { out[static_cast<std::size_t>(m)][i] = v; };
      put(Metric::logrank_p, diff(ev.logrank_p, meta.reported_logrank_p));
      put(Metric::hazard_ratio, diff(ev.hazard_ratio, meta.reported_hazard_ratio));
      put(Metric::median_first,
          diff(ev.medians[0], reported_median(meta, study.dataset.arm(0).label())));
      put(Metric::median_second,
          diff(ev.medians[1], reported_median(meta, study.dataset.arm(1).label())));
      put(Metric::rmstd, ev.rmstd - study.reference.rmstd);
      put(Metric::tie_ratio, ev.tie_ratio);
      put(Metric::logrank_statistic, ev.logrank_statistic);
    }
  };

  std::size_t workers = config.threads ? config.threads : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, n_iter);
  if (workers == 1) {
    for (std::size_t i = 0; i < n_iter; ++i) run_iteration(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n_iter;) {
          try {
            run_iteration(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n_iter;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    RuntimeRecord rec{result.diffs[p].study_id, pairs[p].engine, {}};
    rec.seconds.assign(seconds[p].begin() + 1, seconds[p].end());
    for (double& s : rec.seconds) s = std::max(s, 1e-9);
    result.runtimes.push_back(std::move(rec));
  }
  return result;
}

SixNumberSummary summarize(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::summary, "cannot summarize an empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  SixNumberSummary s;
  s.minimum = v.front();
  s.maximum = v.back();
  s.q1 = detail::quantile_type7(v, 0.25);
  s.median = detail::quantile_type7(v, 0.5);
  s.q3 = detail::quantile_type7(v, 0.75);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.mean = std::clamp(s.mean, s.minimum, s.maximum);
  return s;
}

std::map<EngineKind, SixNumberSummary> runtime_stats(std::span<const RuntimeRecord> records) {
  std::map<EngineKind, std::vector<double>> pooled;
  for (const auto& r : records) {
    auto& dst = pooled[r.engine];
    dst.insert(dst.end(), r.seconds.begin(), r.seconds.end());
  }
  std::map<EngineKind, SixNumberSummary> out;
  for (const auto& [engine, values] : pooled) {
    if (!values.empty()) out.emplace(engine, summarize(values));
  }
  return out;
}

void emit_reports(const BenchmarkConfig& config, const BenchmarkResult& result,
                  const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw Error(Errc::io, outdir.string() + ": " + ec.message());

  for (Metric m : kAllMetrics) {
    const std::string name(metric_name(m));
    std::ostringstream summary;
    std::ostringstream longform;
    summary << "study,engine,n_defined,undefined,min,q1,median,mean,q3,max\n";
    longform << "study,engine,iteration,value\n";
    for (const auto& d : result.diffs) {
      const auto values = d.defined(m);
      summary << d.study_id << ',' << engine_name(d.engine) << ',' << values.size() << ','
              << d.undefined_count(m) << ',' << summary_fields(maybe_summary(values)) << '\n';
      const auto& all = d[m];
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i]) longform << d.study_id << ',' << engine_name(d.engine) << ',' << i << ','
                             << format_double(*all[i]) << '\n';
      }
    }
    write_text_file(outdir / ("summary_" + name + ".csv"), summary.str());
    write_text_file(outdir / ("long_" + name + ".csv"), longform.str());
  }

  std::ostringstream runtimes;
  runtimes << "study,engine,iteration,seconds\n";
  for (const auto& r : result.runtimes) {
    for (std::size_t i = 0; i < r.seconds.size(); ++i) {
      runtimes << r.study_id << ',' << engine_name(r.engine) << ',' << i + 1 << ','
               << format_double(r.seconds[i]) << '\n';
    }
  }
  write_text_file(outdir / "runtimes.csv", runtimes.str());

  std::ostringstream runtime_summary;
  runtime_summary << "engine,n,min,q1,median,mean,q3,max\n";
  const auto stats = runtime_stats(result.runtimes);
  for (EngineKind e : config.engines) {
    std::size_t n = 0;
    for (const auto& r : result.runtimes) {
      if (r.engine == e) n += r.seconds.size();
    }
    auto it = stats.find(e);
    runtime_summary << engine_name(e) << ',' << n << ','
                    << summary_fields(it == stats.end() ? std::nullopt
                                                        : std::optional<SixNumberSummary>(it->second))
                    << '\n';
  }
  write_text_file(outdir / "summary_runtime.csv", runtime_summary.str());

  // Timing is excluded here so the report is a pure function of the config.
  json studies = json::array();
  for (const auto& s : config.studies) {
    studies.push_back({{"study_id", s.dataset.study_id()},
                       {"reference", json::parse(to_json(s.reference))}});
  }
  json pairs = json::array();
  for (const auto& d : result.diffs) {
    json metrics = json::object();
    for (Metric m : kAllMetrics) {
      const auto values = d.defined(m);
      const auto s = maybe_summary(values);
      metrics[std::string(metric_name(m))] = {
          {"kind", metric_is_difference(m) ? "difference" : "value"},
          {"defined", values.size()},
          {"undefined", d.undefined_count(m)},
          {"summary", s ? summary_json(*s) : json(nullptr)},
      };
    }
    pairs.push_back({{"study", d.study_id}, {"engine", engine_name(d.engine)}, {"metrics", metrics}});
  }
  json skipped = json::array();
  for (const auto& s : result.skipped) {
    skipped.push_back({{"study", s.study_id}, {"engine", engine_name(s.engine)}, {"reason", s.reason}});
  }
  json engines = json::array();
  for (EngineKind e : config.engines) engines.push_back(engine_name(e));
  json report{{"iterations", result.iterations}, {"seed", config.base_seed}, {"engines", engines},
              {"studies", studies}, {"pairs", pairs}, {"skipped", skipped}};
  write_text_file(outdir / "report.json", report.dump(2) + "\n");
}

}  // namespace survbench
