#include "survbench/survbench.h"

#include <cstring>
#include <new>
#include <string>

#include "survbench/engines.hpp"
#include "survbench/error.hpp"
#include "survbench/evaluate.hpp"
#include "survbench/harness.hpp"
#include "survbench/reconstruct.hpp"

struct sb_dataset {
  survbench::StudyDataset value;
};

struct sb_model {
  survbench::StudyModel value;
};

namespace {

thread_local std::string g_last_error;

sb_status fail(sb_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
sb_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SB_OK;
  } catch (const survbench::Error& e) {
    return fail(static_cast<sb_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SB_ERR_INTERNAL, "unknown failure");
  }
}

char* dup_string(const std::string& s) {
  auto* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool condition, const char* message) {
  if (!condition) throw survbench::Error(survbench::Errc::invalid_argument, message);
}

survbench::ArmData arm_from_arrays(const char* label, const double* times, const int* status,
                                   size_t n) {
  require(label != nullptr, "arm label is null");
  require(n == 0 || (times && status), "arm arrays are null");
  std::vector<survbench::Observation> obs;
  obs.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    require(status[i] == 0 || status[i] == 1, "status must be 0 or 1");
    obs.push_back({times[i], status[i] == 1});
  }
  return survbench::ArmData(label, std::move(obs));
}

survbench::EngineKind to_engine(sb_engine engine) {
  switch (engine) {
    case SB_ENGINE_PARAMETRIC: return survbench::EngineKind::parametric;
    case SB_ENGINE_KDE: return survbench::EngineKind::kde;
    case SB_ENGINE_CASE: return survbench::EngineKind::case_resampling;
    case SB_ENGINE_CONDBOOT: return survbench::EngineKind::conditional_bootstrap;
  }
  throw survbench::Error(survbench::Errc::invalid_argument, "unknown engine");
}

}  // namespace

extern "C" {

const char* sb_version(void) { return "0.1.0"; }

const char* sb_last_error(void) { return g_last_error.c_str(); }

const char* sb_status_name(sb_status status) {
  if (status == SB_OK) return "ok";
  if (status == SB_ERR_INTERNAL) return "internal";
  if (status >= SB_ERR_INVALID_ARGUMENT && status <= SB_ERR_SUMMARY) {
    return survbench::errc_name(static_cast<survbench::Errc>(status)).data();
  }
  return "unknown";
}

void sb_string_free(char* text) { delete[] text; }

sb_status sb_dataset_load(const char* path, const char* study_id, sb_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    std::optional<std::string> id;
    if (study_id) id = study_id;
    *out = new sb_dataset{survbench::load_dataset(path, id)};
  });
}

sb_status sb_dataset_from_arrays(const char* study_id, const char* label_a, const double* times_a,
                                 const int* status_a, size_t n_a, const char* label_b,
                                 const double* times_b, const int* status_b, size_t n_b,
                                 sb_dataset** out) {
  return guarded([&] {
    require(study_id && out, "null argument");
    *out = new sb_dataset{survbench::StudyDataset(study_id,
                                                  arm_from_arrays(label_a, times_a, status_a, n_a),
                                                  arm_from_arrays(label_b, times_b, status_b, n_b))};
  });
}

sb_status sb_dataset_store(const sb_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset && path, "null argument");
    survbench::store_dataset(dataset->value, path);
  });
}

void sb_dataset_free(sb_dataset* dataset) { delete dataset; }

const char* sb_dataset_study_id(const sb_dataset* dataset) {
  return dataset ? dataset->value.study_id().c_str() : nullptr;
}

const char* sb_dataset_arm_label(const sb_dataset* dataset, size_t arm) {
  if (!dataset || arm > 1) return nullptr;
  return dataset->value.arm(arm).label().c_str();
}

size_t sb_dataset_arm_size(const sb_dataset* dataset, size_t arm) {
  if (!dataset || arm > 1) return 0;
  return dataset->value.arm(arm).size();
}

sb_status sb_dataset_arm_copy(const sb_dataset* dataset, size_t arm, double* times, int* status,
                              size_t capacity) {
  return guarded([&] {
    require(dataset && times && status, "null argument");
    require(arm <= 1, "arm index must be 0 or 1");
    const auto& obs = dataset->value.arm(arm).observations();
    if (capacity < obs.size()) {
      throw survbench::Error(survbench::Errc::size, "buffer too small for arm");
    }
    for (size_t i = 0; i < obs.size(); ++i) {
      times[i] = obs[i].time;
      status[i] = obs[i].event ? 1 : 0;
    }
  });
}

sb_status sb_evaluate(const sb_dataset* dataset, sb_evaluation* out) {
  return guarded([&] {
    require(dataset && out, "null argument");
    const auto r = survbench::evaluate_dataset(dataset->value);
    sb_evaluation e{};
    e.has_logrank = r.logrank_p.has_value();
    e.logrank_statistic = r.logrank_statistic.value_or(0.0);
    e.logrank_p = r.logrank_p.value_or(1.0);
    e.has_hazard_ratio = r.hazard_ratio.has_value();
    e.hazard_ratio = r.hazard_ratio.value_or(0.0);
    for (size_t a = 0; a < 2; ++a) {
      e.has_median[a] = r.medians[a].has_value();
      e.median[a] = r.medians[a].value_or(0.0);
    }
    e.tau = r.tau;
    e.rmstd = r.rmstd;
    e.tie_ratio = r.tie_ratio;
    *out = e;
  });
}

sb_status sb_evaluate_json(const sb_dataset* dataset, char** json_out) {
  return guarded([&] {
    require(dataset && json_out, "null argument");
    *json_out = dup_string(survbench::to_json(survbench::evaluate_dataset(dataset->value)));
  });
}

sb_status sb_engine_from_name(const char* name, sb_engine* out) {
  return guarded([&] {
    require(name && out, "null argument");
    *out = static_cast<sb_engine>(survbench::engine_from_name(name));
  });
}

sb_status sb_model_build(sb_engine engine, const sb_dataset* dataset, sb_model** out) {
  return guarded([&] {
    require(dataset && out, "null argument");
    *out = new sb_model{survbench::build_study_model(to_engine(engine), dataset->value)};
  });
}

void sb_model_free(sb_model* model) { delete model; }

sb_status sb_model_simulate(const sb_model* model, uint64_t seed, uint64_t stream_id,
                            size_t n_per_arm, sb_dataset** out) {
  return guarded([&] {
    require(model && out, "null argument");
    survbench::RandomStream rng(seed, stream_id);
    std::optional<std::size_t> n;
    if (n_per_arm > 0) n = n_per_arm;
    *out = new sb_dataset{survbench::simulate_study(model->value, rng, n)};
  });
}

sb_status sb_model_summary_json(const sb_model* model, char** json_out) {
  return guarded([&] {
    require(model && json_out, "null argument");
    *json_out = dup_string(survbench::model_summary_json(model->value));
  });
}

sb_status sb_reconstruct_files(const char* study_id, const char* label_a, const char* coords_a,
                               const char* risk_a, const char* label_b, const char* coords_b,
                               const char* risk_b, const char* meta_path, sb_dataset** out,
                               char** report_json) {
  return guarded([&] {
    require(study_id && label_a && coords_a && risk_a && label_b && coords_b && risk_b && out,
            "null argument");
    std::map<std::string, std::optional<std::size_t>> totals;
    if (meta_path) totals = survbench::load_total_events(meta_path);
    auto make = [&](const char* label, const char* coords, const char* risk) {
      survbench::DigitizedArm arm;
      arm.label = label;
      arm.coordinates = survbench::load_coordinates(coords);
      arm.risk_table = survbench::load_risk_table(risk);
      if (auto it = totals.find(label); it != totals.end()) arm.total_events = it->second;
      return arm;
    };
    auto [dataset, report] = survbench::reconstruct_study(make(label_a, coords_a, risk_a),
                                                          make(label_b, coords_b, risk_b), study_id);
    char* text = report_json ? dup_string(survbench::to_json(report)) : nullptr;
    *out = new sb_dataset{std::move(dataset)};
    if (report_json) *report_json = text;
  });
}

sb_status sb_bench_run(const char* config_path, const char* outdir, int threads, size_t* skipped) {
  return guarded([&] {
    require(config_path && outdir, "null argument");
    auto config = survbench::load_benchmark_config(config_path);
    config.output_directory = outdir;
    if (threads >= 0) config.threads = static_cast<std::size_t>(threads);
    const auto result = survbench::run_benchmark(config);
    survbench::emit_reports(config, result, config.output_directory);
    if (skipped) *skipped = result.skipped.size();
  });
}

}  // extern "C"
