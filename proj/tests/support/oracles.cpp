#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <set>

namespace oracle {

double km_at(const std::vector<Observation>& obs, double t) {
  std::set<double> event_times;
  for (const auto& o : obs) {
    if (o.event && o.time <= t) event_times.insert(o.time);
  }
  double s = 1.0;
  for (double u : event_times) {
    double at_risk = 0, deaths = 0;
    for (const auto& o : obs) {
      if (o.time >= u) at_risk += 1;
      if (o.time == u && o.event) deaths += 1;
    }
    s *= 1.0 - deaths / at_risk;
  }
  return s;
}

namespace {

std::vector<std::pair<Observation, int>> pooled(const StudyDataset& d) {
  std::vector<std::pair<Observation, int>> out;
  for (int a = 0; a < 2; ++a) {
    for (const auto& o : d.arm(static_cast<std::size_t>(a)).observations()) out.push_back({o, a});
  }
  return out;
}

std::set<double> event_times(const StudyDataset& d) {
  std::set<double> out;
  for (const auto& [o, a] : pooled(d)) {
    if (o.event) out.insert(o.time);
  }
  return out;
}

}  // namespace

Logrank logrank(const StudyDataset& d) {
  const auto all = pooled(d);
  double ome = 0, var = 0;
  for (double t : event_times(d)) {
    double n = 0, n1 = 0, dd = 0, d1 = 0;
    for (const auto& [o, a] : all) {
      if (o.time >= t) {
        n += 1;
        if (a == 0) n1 += 1;
      }
      if (o.time == t && o.event) {
        dd += 1;
        if (a == 0) d1 += 1;
      }
    }
    ome += d1 - dd * n1 / n;
    if (n > 1) var += dd * (n1 / n) * (1 - n1 / n) * (n - dd) / (n - 1);
  }
  return {ome, var, ome * ome / var};
}

double cox_loglik(const StudyDataset& d, double beta, Ties ties) {
  const auto all = pooled(d);
  double ll = 0;
  for (double t : event_times(d)) {
    std::vector<double> dead_weights;
    double risk_sum = 0;
    for (const auto& [o, a] : all) {
      const double x = a == 0 ? 1.0 : 0.0;
      if (o.time >= t) risk_sum += std::exp(beta * x);
      if (o.time == t && o.event) {
        ll += beta * x;
        dead_weights.push_back(std::exp(beta * x));
      }
    }
    double dead_sum = 0;
    for (double w : dead_weights) dead_sum += w;
    const double m = static_cast<double>(dead_weights.size());
    for (std::size_t l = 0; l < dead_weights.size(); ++l) {
      const double frac = ties == Ties::efron ? static_cast<double>(l) / m : 0.0;
      ll -= std::log(risk_sum - frac * dead_sum);
    }
  }
  return ll;
}

double cox_argmax(const StudyDataset& d, Ties ties) {
  double best = 0, best_ll = -INFINITY;
  for (double b = -10; b <= 10; b += 0.01) {
    const double ll = cox_loglik(d, b, ties);
    if (ll > best_ll) {
      best_ll = ll;
      best = b;
    }
  }
  const double g = (std::sqrt(5.0) - 1) / 2;
  double lo = best - 0.02, hi = best + 0.02;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = cox_loglik(d, x1, ties), f2 = cox_loglik(d, x2, ties);
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = cox_loglik(d, x1, ties);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = cox_loglik(d, x2, ties);
    }
  }
  return 0.5 * (lo + hi);
}

double integrate(const std::function<double(double)>& f, std::vector<double> breakpoints,
                 int panels_per_piece) {
  static const double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                              0.9061798459386640};
  static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                              0.2369268850561891, 0.2369268850561891};
  std::sort(breakpoints.begin(), breakpoints.end());
  double total = 0;
  for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    const double a = breakpoints[k], b = breakpoints[k + 1];
    if (!(b > a)) continue;
    const double h = (b - a) / panels_per_piece;
    for (int p = 0; p < panels_per_piece; ++p) {
      const double mid = a + (p + 0.5) * h;
      for (int j = 0; j < 5; ++j) total += 0.5 * h * w[j] * f(mid + 0.5 * h * x[j]);
    }
  }
  return total;
}

double rmst(const ArmData& arm, double tau) {
  std::vector<double> cuts{0.0, tau};
  for (const auto& o : arm.observations()) {
    if (o.time > 0 && o.time < tau) cuts.push_back(o.time);
  }
  const auto& obs = arm.observations();
  return integrate([&](double t) { return km_at(obs, t); }, cuts, 1);
}

double cvm_sf_gil_pelaez(double w) {
  constexpr int K = 500;
  const double pi = std::acos(-1.0);
  const double t1 = 1.0 / K - 0.5 / (K * double(K)) + 1.0 / (6.0 * K * double(K) * K);
  const double t2 = 1.0 / (3.0 * K * double(K) * K);
  auto phi = [&](double t) {
    std::complex<double> logphi = 0;
    for (int k = 1; k <= K; ++k) {
      logphi -= 0.5 * std::log(std::complex<double>(1.0, -2.0 * t / (k * k * pi * pi)));
    }
    const std::complex<double> a(0.0, 2.0 * t / (pi * pi));
    logphi -= 0.5 * (-a * t1 - 0.5 * a * a * t2);
    return std::exp(logphi);
  };
  auto integrand = [&](double t) {
    return (std::exp(std::complex<double>(0.0, -t * w)) * phi(t)).imag() / t;
  };
  std::vector<double> cuts;
  for (double t = 0; t <= 4000; t += 1.0) cuts.push_back(t);
  return 0.5 + integrate(integrand, cuts, 1) / pi;
}

ArmData synthetic_arm(const std::string& label, const SyntheticArm& spec, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::weibull_distribution<double> weib(spec.event_shape, spec.event_scale);
  std::exponential_distribution<double> expo(1.0 / spec.event_scale);
  std::uniform_real_distribution<double> unif(spec.censor_floor, spec.censor_param);
  std::exponential_distribution<double> cexp(spec.censor_param);
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double t = spec.weibull_events ? weib(gen) : expo(gen);
    const double c = spec.uniform_censoring ? unif(gen) : cexp(gen);
    obs.push_back(t < c ? Observation{t, true} : Observation{c, false});
  }
  return ArmData(label, std::move(obs));
}

survbench::DigitizedArm digitize_exact(const ArmData& arm, std::vector<double> risk_times) {
  survbench::DigitizedArm out;
  out.label = arm.label();
  const auto& obs = arm.observations();
  std::set<double> times;
  for (const auto& o : obs) {
    if (o.event) times.insert(o.time);
  }
  for (double t : times) out.coordinates.push_back({t, km_at(obs, t)});
  std::sort(risk_times.begin(), risk_times.end());
  risk_times.erase(std::unique(risk_times.begin(), risk_times.end()), risk_times.end());
  for (double t : risk_times) {
    std::size_t n = 0;
    for (const auto& o : obs) n += o.time >= t ? 1 : 0;
    out.risk_table.push_back({t, n});
  }
  std::size_t events = 0;
  for (const auto& o : obs) events += o.event ? 1 : 0;
  out.total_events = events;
  return out;
}

survbench::DigitizedArm digitize_grid(const ArmData& arm, double step, double risk_every) {
  survbench::DigitizedArm out;
  out.label = arm.label();
  const auto& obs = arm.observations();
  std::set<double> times;
  double max_time = 0;
  std::size_t events = 0;
  for (const auto& o : obs) {
    if (o.event) {
      times.insert(o.time);
      ++events;
    }
    max_time = std::max(max_time, o.time);
  }
  for (double t : times) {
    out.coordinates.push_back({t, std::round(km_at(obs, t) / step) * step});
  }
  for (double t = 0; t < max_time; t += risk_every) {
    std::size_t n = 0;
    for (const auto& o : obs) n += o.time >= t ? 1 : 0;
    out.risk_table.push_back({t, n});
  }
  out.total_events = events;
  return out;
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

std::vector<double> pooled_event_grid(const StudyDataset& d) {
  auto times = event_times(d);
  std::vector<double> out{0.0};
  out.insert(out.end(), times.begin(), times.end());
  return out;
}

}  // namespace oracle
