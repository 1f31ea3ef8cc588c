#include "survbench/engines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>
#include <json.hpp>

#include "math_policy.hpp"
#include "quantile.hpp"
#include "survbench/error.hpp"

namespace survbench {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr std::size_t kStallWindow = 10'000'000;
constexpr std::size_t kStallMinAccepted = 10;  // 1e-6 of the window
constexpr std::size_t kRedrawCap = 100'000;
constexpr double kInfinity = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// t + U(1e-30, 1e-20); at ordinary magnitudes the sum rounds back to t, in
// which case the next representable double is used.
double nudge_above(double t, RandomStream& rng) {
  const double shifted = t + rng.uniform(1e-30, 1e-20);
  return shifted > t ? shifted : std::nextafter(t, kInfinity);
}

double positive_draw(const Distribution& dist, RandomStream& rng) {
  for (std::size_t k = 0; k < kRedrawCap; ++k) {
    const double x = dist.sample(rng);
    if (x > 0.0 && std::isfinite(x)) return x;
  }
  throw Error(Errc::sampler_stall, std::string(family_name(dist.family())) +
                                       " model puts almost no mass on positive times");
}

std::string subset_context(const ArmData& arm, const char* subset) {
  return "arm '" + arm.label() + "' " + subset + " subset";
}

template <typename Fit>
auto fit_subset(const ArmData& arm, const char* subset, const std::vector<double>& sample,
                Fit fit) {
  if (sample.empty()) {
    throw Error(Errc::size, subset_context(arm, subset) + " is empty");
  }
  try {
    return fit(std::span<const double>(sample));
  } catch (const Error& e) {
    throw Error(e.code(), subset_context(arm, subset) + ": " + e.what());
  }
}

}  // namespace

std::string_view engine_name(EngineKind engine) noexcept {
  switch (engine) {
    case EngineKind::parametric: return "parametric";
    case EngineKind::kde: return "kde";
    case EngineKind::case_resampling: return "case-resampling";
    case EngineKind::conditional_bootstrap: return "conditional-bootstrap";
  }
  return "unknown";
}

std::string_view engine_short_name(EngineKind engine) noexcept {
  switch (engine) {
    case EngineKind::parametric: return "parametric";
    case EngineKind::kde: return "kde";
    case EngineKind::case_resampling: return "case";
    case EngineKind::conditional_bootstrap: return "condboot";
  }
  return "unknown";
}

EngineKind engine_from_name(std::string_view name) {
  for (EngineKind e : kAllEngines) {
    if (name == engine_name(e) || name == engine_short_name(e)) return e;
  }
  throw Error(Errc::invalid_argument, "unknown engine '" + std::string(name) + "'");
}

ObservedSubsets split_subsets(const ArmData& arm) {
  ObservedSubsets out;
  for (const auto& o : arm.observations()) {
    (o.event ? out.event_times : out.censoring_times).push_back(o.time);
  }
  return out;
}

double KdeDensity::density(double x) const noexcept {
  double sum = 0.0;
  for (double xi : support_sample) {
    const double z = (x - xi) / bandwidth;
    sum += std::exp(-0.5 * z * z);
  }
  return sum * kInvSqrt2Pi / (static_cast<double>(support_sample.size()) * bandwidth);
}

double KdeDensity::cumulative(double x) const noexcept {
  double sum = 0.0;
  for (double xi : support_sample) {
    sum += 0.5 * boost::math::erfc(-(x - xi) / (bandwidth * detail::kSqrt2), detail::MathPolicy());
  }
  return sum / static_cast<double>(support_sample.size());
}

double silverman_bandwidth(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 2) throw Error(Errc::bandwidth, "bandwidth needs at least 2 values");
  const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : sample) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw Error(Errc::bandwidth, "bandwidth undefined: all values are equal");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = detail::quantile_type7(sorted, 0.75) - detail::quantile_type7(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

KdeDensity kde_fit(std::span<const double> sample, std::optional<double> bandwidth) {
  if (sample.empty()) throw Error(Errc::bandwidth, "kde_fit: empty sample");
  for (double x : sample) {
    if (!std::isfinite(x)) throw Error(Errc::bandwidth, "kde_fit: non-finite value");
  }
  KdeDensity kde;
  if (bandwidth) {
    if (!(*bandwidth > 0.0) || !std::isfinite(*bandwidth)) {
      throw Error(Errc::bandwidth, "bandwidth override must be positive");
    }
    kde.bandwidth = *bandwidth;
  } else {
    kde.bandwidth = silverman_bandwidth(sample);
  }
  kde.support_sample.assign(sample.begin(), sample.end());
  const auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
  kde.lower = std::max(0.0, *mn - 3.0 * kde.bandwidth);
  kde.upper = *mx + 3.0 * kde.bandwidth;

  // Grid maximum, plus the support points themselves so narrow peaks
  // between grid nodes are not missed.
  double peak = 0.0;
  const double step = (kde.upper - kde.lower) / static_cast<double>(kKdeEnvelopeGrid - 1);
  for (std::size_t k = 0; k < kKdeEnvelopeGrid; ++k) {
    peak = std::max(peak, kde.density(kde.lower + static_cast<double>(k) * step));
  }
  for (double x : kde.support_sample) {
    if (x >= kde.lower) peak = std::max(peak, kde.density(x));
  }
  kde.envelope = kKdeEnvelopeSafety * peak;
  return kde;
}

std::vector<double> kde_sample(const KdeDensity& density, std::size_t n, RandomStream& rng) {
  if (!(density.bandwidth > 0.0) || !(density.lower < density.upper) ||
      !(density.envelope > 0.0) || density.support_sample.empty()) {
    throw Error(Errc::bandwidth, "kde_sample: invalid density");
  }
  std::vector<double> out;
  out.reserve(n);
  std::size_t window_proposals = 0;
  std::size_t window_accepted = 0;
  while (out.size() < n) {
    const double x = rng.uniform(density.lower, density.upper);
    const double u = rng.uniform();
    if (u * density.envelope < density.density(x)) {
      out.push_back(x);
      ++window_accepted;
    }
    if (++window_proposals == kStallWindow) {
      if (window_accepted < kStallMinAccepted) {
        throw Error(Errc::sampler_stall, "kde_sample: acceptance rate below 1e-6");
      }
      window_proposals = 0;
      window_accepted = 0;
    }
  }
  return out;
}

double CensoringDistribution::at(double t) const noexcept {
  auto it = std::upper_bound(atoms.begin(), atoms.end(), t);
  if (it == atoms.begin()) return 0.0;
  return cdf[static_cast<std::size_t>(it - atoms.begin()) - 1];
}

double CensoringDistribution::mass(std::size_t k) const noexcept {
  return k == 0 ? cdf[0] : cdf[k] - cdf[k - 1];
}

CensoringDistribution censoring_km(const ArmData& arm) {
  const KmCurve curve = product_limit(arm.observations(), true);
  CensoringDistribution g;
  for (const auto& step : curve.steps()) {
    g.atoms.push_back(step.time);
    g.cdf.push_back(1.0 - step.survival);
  }
  return g;
}

ArmModel::ArmModel(std::string label, std::size_t source_size, State state)
    : label_(std::move(label)), source_size_(source_size), state_(std::move(state)) {}

EngineKind ArmModel::engine() const noexcept {
  return std::visit(Overloaded{
                        [](const ParametricArmState&) { return EngineKind::parametric; },
                        [](const KdeArmState&) { return EngineKind::kde; },
                        [](const CaseResamplingArmState&) { return EngineKind::case_resampling; },
                        [](const ConditionalBootstrapArmState&) {
                          return EngineKind::conditional_bootstrap;
                        },
                    },
                    state_);
}

ArmModel build_model(EngineKind engine, const ArmData& arm) {
  switch (engine) {
    case EngineKind::parametric: {
      const auto subsets = split_subsets(arm);
      auto select = [](std::span<const double> s) { return select_distribution(s); };
      ParametricArmState state{fit_subset(arm, "event", subsets.event_times, select), std::nullopt};
      if (!subsets.censoring_times.empty()) {
        state.censoring = fit_subset(arm, "censoring", subsets.censoring_times, select);
      }
      return ArmModel(arm.label(), arm.size(), std::move(state));
    }
    case EngineKind::kde: {
      const auto subsets = split_subsets(arm);
      auto fit = [](std::span<const double> s) { return kde_fit(s); };
      KdeArmState state{fit_subset(arm, "event", subsets.event_times, fit), std::nullopt};
      if (!subsets.censoring_times.empty()) {
        state.censoring = fit_subset(arm, "censoring", subsets.censoring_times, fit);
      }
      return ArmModel(arm.label(), arm.size(), std::move(state));
    }
    case EngineKind::case_resampling:
      return ArmModel(arm.label(), arm.size(), CaseResamplingArmState{arm});
    case EngineKind::conditional_bootstrap:
      if (arm.event_count() == 0) {
        throw Error(Errc::model, "arm '" + arm.label() + "': no events to resample");
      }
      return ArmModel(arm.label(), arm.size(), ConditionalBootstrapArmState{arm, censoring_km(arm)});
  }
  throw Error(Errc::invalid_argument, "unknown engine");
}

ArmData case_resample(const ArmModel& model, std::size_t n_out, RandomStream& rng) {
  const auto* state = std::get_if<CaseResamplingArmState>(&model.state());
  if (!state) throw Error(Errc::model, "case_resample needs a case-resampling model");
  const auto& src = state->source.observations();
  std::vector<Observation> out;
  out.reserve(n_out);
  for (std::size_t i = 0; i < n_out; ++i) out.push_back(src[rng.index(src.size())]);
  return ArmData(model.label(), std::move(out));
}

std::vector<LatentPair> conditional_bootstrap_latent(const ArmModel& model, RandomStream& rng) {
  const auto* state = std::get_if<ConditionalBootstrapArmState>(&model.state());
  if (!state) throw Error(Errc::model, "conditional_bootstrap needs a conditional-bootstrap model");
  const auto& src = state->source.observations();
  const auto& g = state->censoring;
  const std::size_t n = src.size();

  // Largest observation; among tied maxima the last in input order.
  std::size_t top = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (src[i].time >= src[top].time) top = i;
  }

  std::vector<double> pool;
  for (const auto& o : src) {
    if (o.event) pool.push_back(o.time);
  }
  if (pool.empty()) throw Error(Errc::model, "no events to resample");

  std::vector<LatentPair> latent(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Observation& o = src[i];
    if (!o.event) {
      latent[i].censoring_time = o.time;
      continue;
    }
    if (i == top) {
      latent[i].censoring_time = nudge_above(o.time, rng);
      continue;
    }
    // Inverse transform over the atoms of G beyond t_i, renormalized.
    const auto first = static_cast<std::size_t>(
        std::upper_bound(g.atoms.begin(), g.atoms.end(), o.time) - g.atoms.begin());
    double beyond = 0.0;
    for (std::size_t k = first; k < g.atoms.size(); ++k) beyond += g.mass(k);
    if (!(beyond > 0.0)) {
      latent[i].censoring_time = nudge_above(o.time, rng);
      continue;
    }
    const double target = rng.uniform() * beyond;
    double acc = 0.0;
    std::size_t pick = g.atoms.size() - 1;
    for (std::size_t k = first; k < g.atoms.size(); ++k) {
      acc += g.mass(k);
      if (target < acc) {
        pick = k;
        break;
      }
    }
    latent[i].censoring_time = g.atoms[pick];
  }
  if (!src[top].event) pool.push_back(nudge_above(src[top].time, rng));

  for (auto& pair : latent) pair.event_time = pool[rng.index(pool.size())];
  return latent;
}

ArmData conditional_bootstrap(const ArmModel& model, RandomStream& rng) {
  const auto latent = conditional_bootstrap_latent(model, rng);
  std::vector<Observation> out;
  out.reserve(latent.size());
  for (const auto& pair : latent) out.push_back(observe(pair));
  return ArmData(model.label(), std::move(out));
}

ArmData simulate(const ArmModel& model, std::size_t n_out, RandomStream& rng) {
  return std::visit(
      Overloaded{
          [&](const ParametricArmState& s) {
            std::vector<Observation> out;
            out.reserve(n_out);
            for (std::size_t i = 0; i < n_out; ++i) {
              LatentPair pair;
              pair.event_time = positive_draw(s.event.distribution, rng);
              pair.censoring_time =
                  s.censoring ? positive_draw(s.censoring->distribution, rng) : kInfinity;
              out.push_back(observe(pair));
            }
            return ArmData(model.label(), std::move(out));
          },
          [&](const KdeArmState& s) {
            const auto events = kde_sample(s.event, n_out, rng);
            std::vector<double> censoring =
                s.censoring ? kde_sample(*s.censoring, n_out, rng)
                            : std::vector<double>(n_out, kInfinity);
            std::vector<Observation> out;
            out.reserve(n_out);
            for (std::size_t i = 0; i < n_out; ++i) out.push_back(observe({events[i], censoring[i]}));
            return ArmData(model.label(), std::move(out));
          },
          [&](const CaseResamplingArmState&) { return case_resample(model, n_out, rng); },
          [&](const ConditionalBootstrapArmState&) {
            if (n_out != model.source_size()) {
              throw Error(Errc::size, "conditional bootstrap output size must equal the source size (" +
                                          std::to_string(model.source_size()) + "), got " +
                                          std::to_string(n_out));
            }
            return conditional_bootstrap(model, rng);
          },
      },
      model.state());
}

StudyModel build_study_model(EngineKind engine, const StudyDataset& dataset) {
  return StudyModel{dataset.study_id(), engine,
                    {build_model(engine, dataset.arm(0)), build_model(engine, dataset.arm(1))}};
}

StudyDataset simulate_study(const StudyModel& model, RandomStream& rng,
                            std::optional<std::size_t> n_per_arm) {
  RandomStream first = rng.substream(0);
  RandomStream second = rng.substream(1);
  const auto& a = model.arms[0];
  const auto& b = model.arms[1];
  return StudyDataset(model.study_id, simulate(a, n_per_arm.value_or(a.source_size()), first),
                      simulate(b, n_per_arm.value_or(b.source_size()), second));
}

std::string model_summary_json(const StudyModel& model) {
  using nlohmann::json;
  auto kde_json = [](const KdeDensity& k) {
    return json{{"bandwidth", k.bandwidth},
                {"domain", {k.lower, k.upper}},
                {"envelope", k.envelope},
                {"n", k.support_sample.size()}};
  };
  json arms = json::array();
  for (const auto& arm : model.arms) {
    json entry{{"label", arm.label()}, {"source_size", arm.source_size()}};
    std::visit(Overloaded{
                   [&](const ParametricArmState& s) {
                     entry["event"] = json::parse(to_json(s.event));
                     entry["censoring"] =
                         s.censoring ? json::parse(to_json(*s.censoring)) : json(nullptr);
                   },
                   [&](const KdeArmState& s) {
                     entry["event"] = kde_json(s.event);
                     entry["censoring"] = s.censoring ? kde_json(*s.censoring) : json(nullptr);
                   },
                   [&](const CaseResamplingArmState&) {},
                   [&](const ConditionalBootstrapArmState& s) {
                     entry["censoring_atoms"] = s.censoring.atoms.size();
                   },
               },
               arm.state());
    arms.push_back(std::move(entry));
  }
  json out{{"study_id", model.study_id}, {"engine", engine_name(model.engine)}, {"arms", arms}};
  return out.dump(2) + "\n";
}

}  // namespace survbench
