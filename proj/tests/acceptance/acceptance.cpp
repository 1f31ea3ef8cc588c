// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "survbench/distributions.hpp"
#include "survbench/engines.hpp"
#include "survbench/error.hpp"
#include "survbench/evaluate.hpp"
#include "survbench/harness.hpp"
#include "survbench/reconstruct.hpp"

using namespace survbench;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void run(int number, const char* title, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  if (secs >= budget_seconds) {
    o.pass = false;
    o.detail += " [over time budget]";
  }
  std::printf("%s criterion %d (%s): %s [%.2f s of %.0f s]\n", o.pass ? "PASS" : "FAIL", number,
              title, o.detail.c_str(), secs, budget_seconds);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

StudyDataset synthetic_study(const std::string& id, std::size_t n, std::uint64_t seed,
                             double second_scale = 16.0, bool staggered_entry = false) {
  oracle::SyntheticArm a;
  a.n = n;
  if (staggered_entry) {
    // Administrative censoring between 24 and 48 months of follow-up.
    a.censor_floor = 24.0;
    a.censor_param = 48.0;
  }
  oracle::SyntheticArm b = a;
  b.event_scale = second_scale;
  return StudyDataset(id, oracle::synthetic_arm("control", a, seed),
                      oracle::synthetic_arm("treated", b, seed + 1));
}

BenchmarkStudy self_reference(StudyDataset d) {
  auto meta = metadata_from_evaluation(d.study_id(), evaluate_dataset(d));
  return make_benchmark_study(std::move(d), std::move(meta));
}

Outcome criterion1() {
  const StudyDataset fixture("fixture", ArmData("A", {{1, true}, {3, true}}),
                             ArmData("B", {{2, true}, {4, true}}));
  const auto lr = logrank_test(fixture);
  const auto cox = cox_hazard_ratio(fixture);
  const double r = rmst(ArmData("A", {{1, true}, {2, false}, {3, true}, {4, false}}), 4.0);
  const double hr_target = (1 + std::sqrt(17.0)) / 2;
  const bool ok = std::abs(lr.statistic - 0.6154) <= 1e-4 && std::abs(lr.p_value - 0.433) <= 1e-3 &&
                  cox.hazard_ratio && std::abs(*cox.hazard_ratio - hr_target) <= 1e-6 &&
                  std::abs(r - 2.875) <= 1e-9;
  return {ok, "logrank " + fmt("%.6f", lr.statistic) + " p " + fmt("%.6f", lr.p_value) + " HR " +
                  fmt("%.9f", cox.hazard_ratio.value_or(NAN)) + " RMST " + fmt("%.12f", r)};
}

Outcome criterion2() {
  int exact_ok = 0, grid_ok = 0;
  double worst_dp = 0, worst_dm = 0;
  for (int s = 0; s < 20; ++s) {
    oracle::SyntheticArm a;
    a.n = 100 + 10 * static_cast<std::size_t>(s);
    a.weibull_events = s % 2 == 0;
    a.event_scale = 10.0 + s % 5;
    a.uniform_censoring = s % 3 != 0;
    a.censor_param = a.uniform_censoring ? 40.0 : 0.03;
    oracle::SyntheticArm b = a;
    b.event_scale *= 1.4;
    b.event_shape = 1.1;
    const StudyDataset source("s" + std::to_string(s), oracle::synthetic_arm("A", a, 100 + s),
                              oracle::synthetic_arm("B", b, 200 + s));
    const double p_src = logrank_test(source).p_value;

    const auto grid = oracle::pooled_event_grid(source);
    const auto exact = reconstruct_study(oracle::digitize_exact(source.arm(0), grid),
                                         oracle::digitize_exact(source.arm(1), grid), "exact")
                           .first;
    if (std::abs(logrank_test(exact).p_value - p_src) <= 1e-6) ++exact_ok;

    try {
      const auto coarse = reconstruct_study(oracle::digitize_grid(source.arm(0), 0.01, 6.0),
                                            oracle::digitize_grid(source.arm(1), 0.01, 6.0), "grid")
                              .first;
      const double dp = std::abs(logrank_test(coarse).p_value - p_src);
      double dm = 0;
      bool medians_ok = true;
      for (std::size_t arm = 0; arm < 2; ++arm) {
        const auto m0 = median_survival(km_estimate(source.arm(arm)));
        const auto m1 = median_survival(km_estimate(coarse.arm(arm)));
        if (m0.has_value() != m1.has_value()) {
          medians_ok = false;
        } else if (m0) {
          dm = std::max(dm, std::abs(*m0 - *m1));
        }
      }
      worst_dp = std::max(worst_dp, dp);
      worst_dm = std::max(worst_dm, dm);
      if (medians_ok && dp <= 0.02 && dm <= 0.7) ++grid_ok;
    } catch (const Error&) {
    }
  }
  return {exact_ok == 20 && grid_ok >= 18,
          "exact " + std::to_string(exact_ok) + "/20, grid " + std::to_string(grid_ok) +
              "/20 (worst dp " + fmt("%.4f", worst_dp) + ", worst dmedian " + fmt("%.3f", worst_dm) + ")"};
}

Outcome criterion3() {
  const StudyDataset source = synthetic_study("ties", 150, 303);
  std::string detail;
  bool ok = true;
  for (EngineKind e : kAllEngines) {
    const StudyModel model = build_study_model(e, source);
    const bool bootstrap = e == EngineKind::case_resampling || e == EngineKind::conditional_bootstrap;
    int good = 0;
    for (std::uint64_t i = 0; i < 200; ++i) {
      RandomStream rng(3003, i);
      const double ratio = tie_ratio(simulate_study(model, rng));
      good += bootstrap ? ratio > 0.5 : ratio == 0.0;
    }
    ok = ok && good == 200;
    detail += std::string(engine_short_name(e)) + " " + std::to_string(good) + "/200 ";
  }
  return {ok, detail};
}

Outcome criterion4() {
  BenchmarkConfig cfg;
  cfg.studies.push_back(self_reference(synthetic_study("fidelity", 150, 404, 16.0, true)));
  cfg.engines = {EngineKind::case_resampling, EngineKind::kde};
  cfg.iterations = 1000;
  cfg.base_seed = 4004;
  const auto result = run_benchmark(cfg);
  const auto& ref = cfg.studies[0].reference;
  const double scale = 0.5 * (ref.rmst_first + ref.rmst_second);
  bool ok = result.skipped.empty();
  std::string detail;
  for (const auto& d : result.diffs) {
    const double p = summarize(d.defined(Metric::logrank_p)).median;
    const double hr = summarize(d.defined(Metric::hazard_ratio)).median;
    const double rm = summarize(d.defined(Metric::rmstd)).median;
    ok = ok && std::abs(p) <= 0.05 && std::abs(hr) <= 0.05 && std::abs(rm) <= 0.05 * scale;
    detail += std::string(engine_short_name(d.engine)) + ": dp " + fmt("%+.4f", p) + " dHR " +
              fmt("%+.4f", hr) + " dRMSTD " + fmt("%+.4f", rm) + "; ";
  }
  detail += "RMSTD bound " + fmt("%.4f", 0.05 * scale);
  return {ok, detail};
}

Outcome criterion5() {
  BenchmarkConfig cfg;
  cfg.studies.push_back(self_reference(synthetic_study("timing", 150, 505)));
  cfg.engines.assign(kAllEngines.begin(), kAllEngines.end());
  cfg.iterations = 200;
  cfg.base_seed = 5005;
  cfg.threads = 1;
  const auto result = run_benchmark(cfg);
  const auto stats = runtime_stats(result.runtimes);
  const double cs = stats.at(EngineKind::case_resampling).median;
  bool fastest = true;
  std::string detail;
  for (const auto& [engine, s] : stats) {
    if (engine != EngineKind::case_resampling && s.median < cs) fastest = false;
    detail += std::string(engine_short_name(engine)) + " " + fmt("%.3g", s.median) + " s; ";
  }
  const double ratio = stats.at(EngineKind::kde).median / cs;
  detail += "kde/case " + fmt("%.1f", ratio);
  return {fastest && ratio >= 10.0, detail};
}

Outcome criterion6() {
  const std::vector<Distribution> families{
      Distribution(Family::exponential, {0.5}),
      Distribution(Family::weibull, {1.5, 10.0}),
      Distribution(Family::gamma, {3.0, 2.0}),
      Distribution(Family::log_normal, {1.0, 0.5}),
      Distribution(Family::inverse_gamma, {3.0, 4.0}),
      Distribution(Family::log_logistic, {3.0, 5.0}),
      Distribution(Family::gompertz, {0.1, 0.05}),
      Distribution(Family::normal, {50.0, 5.0}),
      Distribution(Family::cauchy, {10.0, 2.0}),
      Distribution(Family::gumbel, {5.0, 2.0}),
      Distribution(Family::weibull_normal_mixture, {2.0, 5.0, 30.0, 4.0}),
  };
  double worst_family = 0;
  std::uint64_t stream = 0;
  for (const auto& d : families) {
    RandomStream rng(6006, stream++);
    worst_family = std::max(
        worst_family, oracle::ks_distance(d.sample(100000, rng), [&](double x) { return d.cdf(x); }));
  }

  double worst_kde = 0;
  const StudyDataset source = synthetic_study("kde", 150, 606);
  for (std::size_t arm = 0; arm < 2; ++arm) {
    const auto parts = split_subsets(source.arm(arm));
    for (const auto* subset : {&parts.event_times, &parts.censoring_times}) {
      const auto kde = kde_fit(*subset);
      RandomStream rng(6007, stream++);
      const auto draws = kde_sample(kde, 10000, rng);
      const int cells = 4000;
      const double width = (kde.upper - kde.lower) / cells;
      std::vector<double> cdf(cells + 1, 0.0);
      for (int i = 0; i < cells; ++i) {
        const double a = kde.lower + i * width;
        cdf[i + 1] = cdf[i] + oracle::integrate([&](double x) { return kde.density(x); }, {a, a + width}, 1);
      }
      for (double& c : cdf) c /= cdf.back();
      worst_kde = std::max(worst_kde, oracle::ks_distance(draws, [&](double x) {
        const double pos = std::clamp((x - kde.lower) / width, 0.0, double(cells));
        const int i = std::min(static_cast<int>(pos), cells - 1);
        return cdf[i] + (pos - i) * (cdf[i + 1] - cdf[i]);
      }));
    }
  }

  std::vector<double> cuts;
  for (double x = -60; x <= 200; x += 0.25) cuts.push_back(x);
  const double mass =
      oracle::integrate([](double x) { return mixture_pdf(2.0, 5.0, 30.0, 4.0, x); }, cuts, 4);
  return {worst_family <= 0.01 && worst_kde <= 0.02 && std::abs(mass - 1) <= 1e-6,
          "max family KS " + fmt("%.5f", worst_family) + ", max kde KS " + fmt("%.5f", worst_kde) +
              ", mixture mass " + fmt("%.9f", mass)};
}

Outcome criterion7() {
  std::string detail;
  bool ok = true;

  // Monotone transform invariance.
  int invariant = 0;
  double worst_grad = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const StudyDataset d = synthetic_study("inv", 40, 700 + k, 12.0 + k);
    auto map_arm = [](const ArmData& a) {
      std::vector<Observation> obs;
      for (const auto& o : a.observations()) obs.push_back({std::log1p(o.time) + o.time * o.time, o.event});
      return ArmData(a.label(), obs);
    };
    const StudyDataset t(d.study_id(), map_arm(d.arm(0)), map_arm(d.arm(1)));
    const auto h0 = cox_hazard_ratio(d).hazard_ratio, h1 = cox_hazard_ratio(t).hazard_ratio;
    if (std::abs(logrank_test(d).p_value - logrank_test(t).p_value) <= 1e-12 &&
        h0.has_value() == h1.has_value() && (!h0 || std::abs(*h0 - *h1) <= 1e-10 * *h0)) {
      ++invariant;
    }
    // Score against a central difference of the log partial likelihood.
    for (double beta : {-1.0, 0.3}) {
      const double h = 1e-5;
      const double fd = (cox_partial_likelihood(d, beta + h).value -
                         cox_partial_likelihood(d, beta - h).value) / (2 * h);
      worst_grad = std::max(worst_grad, std::abs(fd - cox_partial_likelihood(d, beta).gradient));
    }
  }
  ok = ok && invariant == 20 && worst_grad <= 1e-6;
  detail += "transform invariance " + std::to_string(invariant) + "/20, score FD gap " +
            fmt("%.2e", worst_grad);

  // Conditional bootstrap keeps every non-maximal source censoring time.
  const StudyDataset cb = synthetic_study("cb", 200, 777);
  int preserved = 0;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    const auto model = build_model(EngineKind::conditional_bootstrap, cb.arm(arm));
    const auto& obs = cb.arm(arm).observations();
    std::size_t top = 0;
    for (std::size_t i = 1; i < obs.size(); ++i) {
      if (obs[i].time >= obs[top].time) top = i;
    }
    for (std::uint64_t s = 0; s < 10; ++s) {
      RandomStream rng(7007, s);
      const auto latent = conditional_bootstrap_latent(model, rng);
      std::vector<double> want, got;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i].event || i == top) continue;
        want.push_back(obs[i].time);
        got.push_back(latent[i].censoring_time);
      }
      std::sort(want.begin(), want.end());
      std::sort(got.begin(), got.end());
      preserved += want == got;
    }
  }
  ok = ok && preserved == 20;
  detail += ", censoring preserved " + std::to_string(preserved) + "/20";

  // Parallel determinism.
  BenchmarkConfig cfg;
  cfg.studies.push_back(self_reference(synthetic_study("det", 80, 708)));
  cfg.engines.assign(kAllEngines.begin(), kAllEngines.end());
  cfg.iterations = 50;
  cfg.base_seed = 7008;
  cfg.threads = 1;
  const auto serial = run_benchmark(cfg);
  cfg.threads = 4;
  const auto parallel = run_benchmark(cfg);
  bool same = serial.diffs.size() == parallel.diffs.size();
  for (std::size_t k = 0; same && k < serial.diffs.size(); ++k) {
    same = serial.diffs[k].values == parallel.diffs[k].values;
  }
  ok = ok && same;
  detail += same ? ", 1 vs 4 threads identical" : ", 1 vs 4 threads differ";
  return {ok, detail};
}

}  // namespace

int main() {
  run(1, "oracle equivalence", 1, criterion1);
  run(2, "reconstruction round trip", 120, criterion2);
  run(3, "tie-ratio dichotomy", 60, criterion3);
  run(4, "engine fidelity", 300, criterion4);
  run(5, "runtime ordering", 120, criterion5);
  run(6, "distributional correctness", 120, criterion6);
  run(7, "invariant suites", 600, criterion7);
  std::printf("%d of 7 criteria failed\n", failures);
  return failures;
}
