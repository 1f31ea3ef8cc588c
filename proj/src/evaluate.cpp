#include "survbench/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <json.hpp>

#include "math_policy.hpp"
#include "survbench/error.hpp"

namespace survbench {

namespace {

struct Record {
  double time;
  bool event;
  bool first_arm;
};

std::vector<Record> pooled_sorted(const StudyDataset& dataset) {
  std::vector<Record> out;
  out.reserve(dataset.size());
  for (std::size_t a = 0; a < 2; ++a) {
    for (const auto& o : dataset.arm(a).observations()) out.push_back({o.time, o.event, a == 0});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Record& x, const Record& y) { return x.time < y.time; });
  return out;
}

// Per distinct event time: risk-set and death-set sizes overall and for
// the first arm.
struct EventTime {
  double n = 0, n1 = 0, d = 0, d1 = 0;
};

std::vector<EventTime> event_table(const StudyDataset& dataset) {
  const auto rec = pooled_sorted(dataset);
  double n = static_cast<double>(rec.size());
  double n1 = static_cast<double>(dataset.arm(0).size());
  std::vector<EventTime> out;
  std::size_t i = 0;
  while (i < rec.size()) {
    const double t = rec[i].time;
    EventTime e{n, n1, 0, 0};
    double leave = 0, leave1 = 0;
    for (; i < rec.size() && rec[i].time == t; ++i) {
      leave += 1;
      if (rec[i].first_arm) leave1 += 1;
      if (rec[i].event) {
        e.d += 1;
        if (rec[i].first_arm) e.d1 += 1;
      }
    }
    if (e.d > 0) out.push_back(e);
    n -= leave;
    n1 -= leave1;
  }
  return out;
}

constexpr double kDivergedBeta = 30.0;

// With a binary covariate the partial likelihood has no finite maximum
// exactly when one arm never has an event while the other arm is at risk.
bool monotone_likelihood(const StudyDataset& dataset) {
  bool rises = true, falls = true;
  for (const auto& e : event_table(dataset)) {
    if (e.n1 > 0 && e.d > e.d1) rises = false;
    if (e.n > e.n1 && e.d1 > 0) falls = false;
  }
  return rises || falls;
}

}  // namespace

double chi_square1_sf(double x) noexcept {
  if (!(x > 0.0)) return 1.0;
  return boost::math::erfc(std::sqrt(0.5 * x), detail::MathPolicy());
}

LogrankResult logrank_test(const StudyDataset& dataset) {
  double o_minus_e = 0.0;
  double var = 0.0;
  for (const auto& e : event_table(dataset)) {
    const double frac = e.n1 / e.n;
    o_minus_e += e.d1 - e.d * frac;
    if (e.n > 1) var += e.d * frac * (1.0 - frac) * (e.n - e.d) / (e.n - 1.0);
  }
  if (!(var > 0.0)) {
    throw Error(Errc::degenerate, "logrank test undefined: zero variance");
  }
  const double stat = o_minus_e * o_minus_e / var;
  return {stat, chi_square1_sf(stat)};
}

CoxPartial cox_partial_likelihood(const StudyDataset& dataset, double beta, TieMethod ties) {
  const double w = std::exp(beta);
  CoxPartial out;
  for (const auto& e : event_table(dataset)) {
    // Covariate is binary, so the first and second moment sums coincide.
    const double s0 = (e.n - e.n1) + e.n1 * w;
    const double s1 = e.n1 * w;
    const double d0 = (e.d - e.d1) + e.d1 * w;
    const double d1 = e.d1 * w;
    out.value += beta * e.d1;
    out.gradient += e.d1;
    const auto deaths = static_cast<std::size_t>(e.d);
    for (std::size_t l = 0; l < deaths; ++l) {
      const double f = ties == TieMethod::efron ? static_cast<double>(l) / e.d : 0.0;
      const double a = s0 - f * d0;
      const double b = s1 - f * d1;
      const double ratio = b / a;
      out.value -= std::log(a);
      out.gradient -= ratio;
      out.hessian -= ratio - ratio * ratio;
    }
  }
  return out;
}

CoxResult cox_hazard_ratio(const StudyDataset& dataset, const CoxOptions& options) {
  // Same precondition as the logrank test: a non-empty, non-trivial risk set.
  (void)logrank_test(dataset);

  CoxResult res;
  double beta = 0.0;
  CoxPartial cur = cox_partial_likelihood(dataset, beta, options.ties);
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (std::abs(cur.gradient) < 1e-11 * std::max(1.0, std::abs(cur.value))) {
      res.converged = true;
      break;
    }
    if (!(cur.hessian < 0.0)) break;
    double step = -cur.gradient / cur.hessian;
    if (std::abs(step) < 1e-10 * std::max(1.0, std::abs(beta))) {
      res.converged = true;
      break;
    }
    step = std::clamp(step, -5.0, 5.0);
    CoxPartial next = cox_partial_likelihood(dataset, beta + step, options.ties);
    // Near the optimum the likelihood gain is below its rounding noise, so
    // small Newton steps are taken without the ascent check.
    const bool local = std::abs(step) < 1e-4;
    int halvings = 0;
    while (!local && !(next.value >= cur.value) && halvings < 40) {
      step *= 0.5;
      next = cox_partial_likelihood(dataset, beta + step, options.ties);
      ++halvings;
    }
    if (!local && !(next.value >= cur.value)) break;
    beta += step;
    cur = next;
    if (std::abs(beta) > kDivergedBeta) break;
  }
  res.beta = beta;
  res.log_likelihood = cur.value;
  res.score = cur.gradient;
  if (std::abs(beta) > kDivergedBeta || monotone_likelihood(dataset)) res.converged = false;
  if (res.converged) res.hazard_ratio = std::exp(beta);
  return res;
}

double rmst_tau(const StudyDataset& dataset) {
  std::array<double, 2> max_time{};
  std::array<bool, 2> max_censored{};
  double max_censoring = -1.0;
  double overall = 0.0;
  for (std::size_t a = 0; a < 2; ++a) {
    const auto& obs = dataset.arm(a).observations();
    double m = -1.0;
    bool cens = false;
    for (const auto& o : obs) {
      if (o.time > m) {
        m = o.time;
        cens = !o.event;
      } else if (o.time == m && !o.event) {
        cens = true;
      }
      if (!o.event) max_censoring = std::max(max_censoring, o.time);
    }
    max_time[a] = m;
    max_censored[a] = cens;
    overall = std::max(overall, m);
  }
  if (max_censored[0] && max_censored[1]) return std::min(max_time[0], max_time[1]);
  return max_censoring >= 0.0 ? max_censoring : overall;
}

double rmst(const ArmData& arm, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::invalid_argument, "rmst: tau must be positive");
  const KmCurve km = km_estimate(arm);
  double area = 0.0;
  double from = 0.0;
  double level = 1.0;
  for (const auto& step : km.steps()) {
    if (step.time >= tau) break;
    area += level * (step.time - from);
    from = step.time;
    level = step.survival;
  }
  return area + level * (tau - from);
}

double rmstd(const StudyDataset& dataset) {
  const double tau = rmst_tau(dataset);
  return rmst(dataset.arm(0), tau) - rmst(dataset.arm(1), tau);
}

double tie_ratio(const StudyDataset& dataset) {
  if (dataset.size() == 0) throw Error(Errc::invalid_argument, "tie_ratio: empty dataset");
  std::map<double, std::size_t> counts;
  for (const auto& arm : dataset.arms()) {
    for (const auto& o : arm.observations()) ++counts[o.time];
  }
  std::size_t tied = 0;
  for (const auto& [t, c] : counts) {
    if (c > 1) tied += c;
  }
  return static_cast<double>(tied) / static_cast<double>(dataset.size());
}

EvaluationResult evaluate_dataset(const StudyDataset& dataset, const CoxOptions& cox) {
  EvaluationResult r;
  try {
    const auto lr = logrank_test(dataset);
    r.logrank_statistic = lr.statistic;
    r.logrank_p = lr.p_value;
    const auto fit = cox_hazard_ratio(dataset, cox);
    r.hazard_ratio = fit.hazard_ratio;
  } catch (const Error& e) {
    if (e.code() != Errc::degenerate) throw;
  }
  for (std::size_t a = 0; a < 2; ++a) {
    r.arm_labels[a] = dataset.arm(a).label();
    r.medians[a] = median_survival(km_estimate(dataset.arm(a)));
  }
  r.tau = rmst_tau(dataset);
  if (r.tau > 0.0) {
    r.rmst_first = rmst(dataset.arm(0), r.tau);
    r.rmst_second = rmst(dataset.arm(1), r.tau);
  }
  r.rmstd = r.rmst_first - r.rmst_second;
  r.tie_ratio = tie_ratio(dataset);
  return r;
}

std::string to_json(const EvaluationResult& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json medians = json::object();
  for (std::size_t a = 0; a < 2; ++a) medians[r.arm_labels[a]] = opt(r.medians[a]);
  json out{
      {"logrank_statistic", opt(r.logrank_statistic)},
      {"logrank_p", opt(r.logrank_p)},
      {"hazard_ratio", opt(r.hazard_ratio)},
      {"arms", {r.arm_labels[0], r.arm_labels[1]}},
      {"medians", medians},
      {"tau", r.tau},
      {"rmst", {r.rmst_first, r.rmst_second}},
      {"rmstd", r.rmstd},
      {"tie_ratio", r.tie_ratio},
  };
  return out.dump(2) + "\n";
}

}  // namespace survbench
