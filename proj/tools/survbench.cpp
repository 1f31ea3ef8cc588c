// survbench command-line front end. Everything goes through the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "survbench/survbench.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitSkipped = 2;

int report_failure(sb_status status) {
  std::fprintf(stderr, "survbench: %s error: %s\n", sb_status_name(status), sb_last_error());
  return kExitFailure;
}

bool write_file(const std::string& path, const char* text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    std::fprintf(stderr, "survbench: cannot write '%s'\n", path.c_str());
    return false;
  }
  return true;
}

// "A=path,B=path" given as repeated or comma-separated LABEL=PATH items.
std::vector<std::pair<std::string, std::string>> parse_labelled(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw CLI::ValidationError("expected LABEL=PATH, got '" + item + "'");
    }
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

struct DatasetHandle {
  sb_dataset* ptr = nullptr;
  ~DatasetHandle() { sb_dataset_free(ptr); }
};

struct ModelHandle {
  sb_model* ptr = nullptr;
  ~ModelHandle() { sb_model_free(ptr); }
};

struct StringHandle {
  char* ptr = nullptr;
  ~StringHandle() { sb_string_free(ptr); }
};

struct ReconstructArgs {
  std::vector<std::string> coords;
  std::vector<std::string> risk;
  std::string out;
  std::string report;
  std::string meta;
  std::string study_id;
};

int run_reconstruct(const ReconstructArgs& args) {
  const auto coords = parse_labelled(args.coords);
  const auto risk = parse_labelled(args.risk);
  if (coords.size() != 2 || risk.size() != 2) {
    std::fprintf(stderr, "survbench: reconstruct needs exactly two arms in --coords and --risk\n");
    return kExitFailure;
  }
  std::map<std::string, std::string> risk_by_label(risk.begin(), risk.end());
  for (const auto& [label, path] : coords) {
    if (!risk_by_label.count(label)) {
      std::fprintf(stderr, "survbench: no risk table for arm '%s'\n", label.c_str());
      return kExitFailure;
    }
  }
  const std::string study_id =
      args.study_id.empty() ? std::filesystem::path(args.out).stem().string() : args.study_id;
  DatasetHandle dataset;
  StringHandle report;
  const sb_status st = sb_reconstruct_files(
      study_id.c_str(), coords[0].first.c_str(), coords[0].second.c_str(),
      risk_by_label[coords[0].first].c_str(), coords[1].first.c_str(), coords[1].second.c_str(),
      risk_by_label[coords[1].first].c_str(), args.meta.empty() ? nullptr : args.meta.c_str(),
      &dataset.ptr, &report.ptr);
  if (st != SB_OK) return report_failure(st);
  if (const sb_status s = sb_dataset_store(dataset.ptr, args.out.c_str()); s != SB_OK) {
    return report_failure(s);
  }
  if (!args.report.empty() && !write_file(args.report, report.ptr)) return kExitFailure;
  return EXIT_SUCCESS;
}

struct SimulateArgs {
  std::string engine;
  std::string input;
  std::string n_per_arm = "source";
  std::uint64_t seed = 0;
  std::string out;
  std::string model_summary;
};

int run_simulate(const SimulateArgs& args) {
  sb_engine engine{};
  if (const sb_status s = sb_engine_from_name(args.engine.c_str(), &engine); s != SB_OK) {
    return report_failure(s);
  }
  std::size_t n = 0;
  if (args.n_per_arm != "source") {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(args.n_per_arm, &used);
      if (used != args.n_per_arm.size() || v <= 0) throw std::invalid_argument("n");
      n = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      std::fprintf(stderr, "survbench: --n-per-arm must be a positive integer or 'source'\n");
      return kExitFailure;
    }
  }
  DatasetHandle source;
  if (const sb_status s = sb_dataset_load(args.input.c_str(), nullptr, &source.ptr); s != SB_OK) {
    return report_failure(s);
  }
  ModelHandle model;
  if (const sb_status s = sb_model_build(engine, source.ptr, &model.ptr); s != SB_OK) {
    return report_failure(s);
  }
  DatasetHandle sim;
  if (const sb_status s = sb_model_simulate(model.ptr, args.seed, 0, n, &sim.ptr); s != SB_OK) {
    return report_failure(s);
  }
  if (const sb_status s = sb_dataset_store(sim.ptr, args.out.c_str()); s != SB_OK) {
    return report_failure(s);
  }
  if (!args.model_summary.empty()) {
    StringHandle summary;
    if (const sb_status s = sb_model_summary_json(model.ptr, &summary.ptr); s != SB_OK) {
      return report_failure(s);
    }
    if (!write_file(args.model_summary, summary.ptr)) return kExitFailure;
  }
  return EXIT_SUCCESS;
}

int run_evaluate(const std::string& input, const std::string& out) {
  DatasetHandle dataset;
  if (const sb_status s = sb_dataset_load(input.c_str(), nullptr, &dataset.ptr); s != SB_OK) {
    return report_failure(s);
  }
  StringHandle json;
  if (const sb_status s = sb_evaluate_json(dataset.ptr, &json.ptr); s != SB_OK) {
    return report_failure(s);
  }
  if (out.empty() || out == "-") {
    std::fputs(json.ptr, stdout);
    return EXIT_SUCCESS;
  }
  return write_file(out, json.ptr) ? EXIT_SUCCESS : kExitFailure;
}

int run_bench(const std::string& config, const std::string& out, int threads) {
  std::size_t skipped = 0;
  if (const sb_status s = sb_bench_run(config.c_str(), out.c_str(), threads, &skipped); s != SB_OK) {
    return report_failure(s);
  }
  if (skipped > 0) {
    std::fprintf(stderr, "survbench: %zu study/engine pair(s) skipped; see report.json\n", skipped);
    return kExitSkipped;
  }
  return EXIT_SUCCESS;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Survival-data simulation benchmark"};
  app.set_version_flag("--version", std::string(sb_version()));
  app.require_subcommand(1);

  ReconstructArgs rec;
  auto* reconstruct = app.add_subcommand("reconstruct", "Rebuild individual records from digitized curves");
  reconstruct->add_option("--coords", rec.coords, "LABEL=coords.csv for each arm")
      ->required()
      ->delimiter(',');
  reconstruct->add_option("--risk", rec.risk, "LABEL=risk.csv for each arm")->required()->delimiter(',');
  reconstruct->add_option("--out", rec.out, "Output dataset CSV")->required();
  reconstruct->add_option("--report", rec.report, "Reconstruction report JSON");
  reconstruct->add_option("--meta", rec.meta, "JSON with total events per arm");
  reconstruct->add_option("--study-id", rec.study_id, "Study id (default: output file stem)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate a dataset from a fitted engine");
  simulate->add_option("--engine", sim.engine, "parametric, kde, case or condboot")->required();
  simulate->add_option("--input", sim.input, "Source dataset CSV")->required()->check(CLI::ExistingFile);
  simulate->add_option("--n-per-arm", sim.n_per_arm, "Arm size or 'source'")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output dataset CSV")->required();
  simulate->add_option("--model-summary", sim.model_summary, "Write the fitted model as JSON");

  std::string eval_input;
  std::string eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Compute logrank, hazard ratio, medians and RMST");
  evaluate->add_option("--input", eval_input, "Dataset CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval_out, "Output JSON (stdout when omitted)");

  std::string bench_config;
  std::string bench_out;
  int bench_threads = -1;
  auto* bench = app.add_subcommand("bench", "Run the engine benchmark");
  bench->add_option("--config", bench_config, "bench.json")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", bench_out, "Output directory")->required();
  bench->add_option("--threads", bench_threads, "Worker threads (overrides the config)");

  try {
    app.parse(argc, argv);
    if (*reconstruct) return run_reconstruct(rec);
    if (*simulate) return run_simulate(sim);
    if (*evaluate) return run_evaluate(eval_input, eval_out);
    if (*bench) return run_bench(bench_config, bench_out, bench_threads);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return EXIT_SUCCESS;
}
