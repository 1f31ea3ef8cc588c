#include "survbench/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "survbench/error.hpp"
#include "text_util.hpp"

namespace survbench {

namespace {

using Count = long long;

std::string interval_name(double from, double to) {
  return "[" + format_double(from) + ", " + format_double(to) + ")";
}

// Coordinates after monotonization, with a point at every risk-table time
// and a leading (first risk time, 1) anchor.
std::vector<CurvePoint> prepare_coordinates(const DigitizedArm& arm) {
  const auto& coords = arm.coordinates;
  const auto& risk = arm.risk_table;
  std::vector<CurvePoint> pts;
  pts.reserve(coords.size() + risk.size() + 1);
  double running = 1.0;
  for (const auto& c : coords) {
    running = std::min(running, std::clamp(c.survival, 0.0, 1.0));
    pts.push_back({c.time, running});
  }
  pts.insert(pts.begin(), CurvePoint{risk.front().time, 1.0});
  for (const auto& row : risk) {
    auto it = std::lower_bound(pts.begin(), pts.end(), row.time,
                               [](const CurvePoint& p, double t) { return p.time < t; });
    if (it != pts.end() && it->time == row.time) continue;
    const double s = it == pts.begin() ? 1.0 : std::prev(it)->survival;
    pts.insert(it, CurvePoint{row.time, s});
  }
  return pts;
}

void validate_input(const DigitizedArm& arm) {
  const std::string who = "arm '" + arm.label + "': ";
  if (arm.label.empty()) throw Error(Errc::structure, "digitized arm needs a label");
  if (arm.coordinates.empty()) throw Error(Errc::structure, who + "no curve coordinates");
  if (arm.risk_table.empty()) throw Error(Errc::structure, who + "empty risk table");
  double prev = -1.0;
  for (const auto& c : arm.coordinates) {
    if (!std::isfinite(c.time) || c.time < 0.0 || !std::isfinite(c.survival)) {
      throw Error(Errc::structure, who + "coordinates must be finite with time >= 0");
    }
    if (c.time < prev) throw Error(Errc::structure, who + "coordinate times must be non-decreasing");
    prev = c.time;
  }
  if (arm.risk_table.front().at_risk == 0) {
    throw Error(Errc::structure, who + "first risk-table row must have a positive number at risk");
  }
  for (std::size_t i = 0; i < arm.risk_table.size(); ++i) {
    const auto& row = arm.risk_table[i];
    if (!std::isfinite(row.time) || row.time < 0.0) {
      throw Error(Errc::structure, who + "risk-table times must be finite and >= 0");
    }
    if (i == 0) continue;
    const auto& before = arm.risk_table[i - 1];
    if (!(row.time > before.time)) {
      throw Error(Errc::structure, who + "risk-table times must be strictly increasing");
    }
    if (row.at_risk > before.at_risk) {
      throw Error(Errc::infeasible,
                  who + "interval " + interval_name(before.time, row.time) +
                      ": number at risk increases from " + std::to_string(before.at_risk) +
                      " to " + std::to_string(row.at_risk));
    }
  }
  if (arm.risk_table.front().time > arm.coordinates.front().time) {
    throw Error(Errc::structure, who + "first risk-table time lies after the first coordinate");
  }
}

class GuyotSolver {
 public:
  GuyotSolver(std::vector<CurvePoint> pts, std::vector<RiskRow> risk,
              std::optional<std::size_t> total_events, std::string label)
      : label_(std::move(label)), total_events_(total_events) {
    for (const auto& p : pts) {
      t_.push_back(p.time);
      s_.push_back(p.survival);
    }
    for (const auto& r : risk) {
      risk_t_.push_back(r.time);
      nrisk_.push_back(static_cast<Count>(r.at_risk));
    }
    const std::size_t n_int = risk_t_.size();
    lower_.resize(n_int);
    upper_.resize(n_int);
    for (std::size_t i = 0; i < n_int; ++i) {
      lower_[i] = static_cast<std::size_t>(std::lower_bound(t_.begin(), t_.end(), risk_t_[i]) -
                                           t_.begin());
    }
    for (std::size_t i = 0; i + 1 < n_int; ++i) upper_[i] = lower_[i + 1] - 1;
    upper_[n_int - 1] = t_.size() - 1;

    const std::size_t n_t = t_.size();
    cen_.assign(n_t, 0);
    d_.assign(n_t, 0);
    nhat_.assign(n_t + 1, nrisk_[0] + 1);
    km_hat_.assign(n_t, 1.0);
    last_i_.assign(n_int, 0);
    ncensor_.assign(n_int, 0);
  }

  void run() {
    const std::size_t n_int = risk_t_.size();
    for (std::size_t i = 0; i + 1 < n_int; ++i) solve_interval(i);
    solve_last_interval();
  }

  ArmData build_arm() const {
    std::vector<Observation> obs;
    const Count n = nrisk_initial();
    obs.reserve(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < t_.size(); ++k) {
      for (Count j = 0; j < d_[k]; ++j) obs.push_back({t_[k], true});
    }
    for (std::size_t k = 0; k + 1 < t_.size(); ++k) {
      const double mid = 0.5 * (t_[k] + t_[k + 1]);
      for (Count j = 0; j < cen_[k]; ++j) obs.push_back({mid, false});
    }
    while (static_cast<Count>(obs.size()) < n) obs.push_back({t_.back(), false});
    if (static_cast<Count>(obs.size()) > n) {
      throw Error(Errc::infeasible, "arm '" + label_ + "': events and censorings exceed the initial number at risk");
    }
    return ArmData(label_, std::move(obs));
  }

  std::size_t iterations() const { return iterations_; }
  bool hit_cap() const { return hit_cap_; }
  Count nrisk_initial() const { return nrisk_0_; }

  void set_initial(Count n0) { nrisk_0_ = n0; }

 private:
  Count round_count(double v) const { return static_cast<Count>(std::llround(v)); }

  void place_censoring(std::size_t from, std::size_t to_break, Count count) {
    // Censoring times spread evenly over [t[from], t[to_break]], binned into
    // the point intervals [t[k], t[k+1]) for k in [from, to_break).
    for (std::size_t k = from; k < to_break; ++k) cen_[k] = 0;
    if (count <= 0) return;
    const double a = t_[from];
    const double b = t_[to_break];
    for (Count j = 1; j <= count; ++j) {
      const double c = a + static_cast<double>(j) * (b - a) / static_cast<double>(count + 1);
      auto it = std::upper_bound(t_.begin() + static_cast<std::ptrdiff_t>(from),
                                 t_.begin() + static_cast<std::ptrdiff_t>(to_break), c);
      auto k = static_cast<std::size_t>(it - t_.begin());
      k = k == from ? from : k - 1;
      ++cen_[k];
    }
  }

  Count events_at(std::size_t k, std::size_t last) const {
    if (km_hat_[last] <= 0.0 || nhat_[k] <= 0) return 0;
    const Count d = round_count(static_cast<double>(nhat_[k]) * (1.0 - s_[k] / km_hat_[last]));
    return std::clamp<Count>(d, 0, nhat_[k]);
  }

  void update_km(std::size_t k, std::size_t last) {
    km_hat_[k] = nhat_[k] > 0
                     ? km_hat_[last] * (1.0 - static_cast<double>(d_[k]) / static_cast<double>(nhat_[k]))
                     : km_hat_[last];
  }

  // Survival just before risk time i must be positive while anyone is at risk.
  void check_feasible(std::size_t i) const {
    if (i > 0 && lower_[i] > 0 && s_[lower_[i] - 1] <= 0.0 && nrisk_[i] > 0) {
      throw Error(Errc::infeasible,
                  "arm '" + label_ + "': interval " +
                      interval_name(risk_t_[i - 1], risk_t_[i]) + ": survival reaches 0 but " +
                      std::to_string(nrisk_[i]) + " remain at risk at " + format_double(risk_t_[i]));
    }
  }

  void solve_interval(std::size_t i) {
    check_feasible(i + 1);
    const std::size_t lo = lower_[i];
    const std::size_t hi = upper_[i];
    const std::size_t next = lower_[i + 1];
    ncensor_[i] = s_[lo] > 0.0
                      ? round_count(static_cast<double>(nrisk_[i]) * s_[next] / s_[lo] -
                                    static_cast<double>(nrisk_[i + 1]))
                      : 0;
    std::size_t last = last_i_[i];
    for (std::size_t local = 0;; ++local) {
      if (local == kReconstructionIterationCap) {
        hit_cap_ = true;
        break;
      }
      ++iterations_;
      ncensor_[i] = std::max<Count>(ncensor_[i], 0);
      place_censoring(lo, next, ncensor_[i]);
      nhat_[lo] = nrisk_[i];
      last = last_i_[i];
      for (std::size_t k = lo; k <= hi; ++k) {
        if (i == 0 && k == lo) {
          d_[k] = 0;
          km_hat_[k] = 1.0;
        } else {
          d_[k] = events_at(k, last);
          update_km(k, last);
        }
        nhat_[k + 1] = nhat_[k] - d_[k] - cen_[k];
        if (d_[k] != 0) last = k;
      }
      const Count gap = nhat_[next] - nrisk_[i + 1];
      if (gap == 0 || (gap < 0 && ncensor_[i] == 0)) break;
      ncensor_[i] += gap;
    }
    if (nhat_[next] < nrisk_[i + 1]) nrisk_[i + 1] = std::max<Count>(nhat_[next], 0);
    last_i_[i + 1] = last;
    placed_before_last_ += std::accumulate(cen_.begin() + static_cast<std::ptrdiff_t>(lo),
                                           cen_.begin() + static_cast<std::ptrdiff_t>(next),
                                           Count{0});
  }

  // Events and censorings over the last interval for the current
  // ncensor_ value. Returns the total event count over the whole curve.
  Count fill_last_interval(bool clamp_last_step) {
    const std::size_t n_int = risk_t_.size();
    const std::size_t lo = lower_[n_int - 1];
    const std::size_t hi = upper_[n_int - 1];
    if (ncensor_[n_int - 1] <= 0) ncensor_[n_int - 1] = 0;
    place_censoring(lo, hi, ncensor_[n_int - 1]);
    nhat_[lo] = nrisk_[n_int - 1];
    std::size_t last = last_i_[n_int - 1];
    for (std::size_t k = lo; k <= hi; ++k) {
      if (n_int == 1 && k == lo) {
        d_[k] = 0;
        km_hat_[k] = 1.0;
      } else {
        d_[k] = events_at(k, last);
        update_km(k, last);
      }
      if (k != hi || !clamp_last_step) {
        nhat_[k + 1] = nhat_[k] - d_[k] - cen_[k];
        if (nhat_[k + 1] < 0) {
          nhat_[k + 1] = 0;
          cen_[k] = nhat_[k] - d_[k];
        }
      }
      if (d_[k] != 0) last = k;
    }
    return std::accumulate(d_.begin(), d_.begin() + static_cast<std::ptrdiff_t>(hi + 1), Count{0});
  }

  void solve_last_interval() {
    const std::size_t n_int = risk_t_.size();
    const std::size_t lo = lower_[n_int - 1];
    const std::size_t hi = upper_[n_int - 1];
    check_feasible(n_int - 1);
    if (n_int > 1) {
      const double span_before = t_[upper_[n_int - 2]] - t_[lower_[0]];
      const double span_last = t_[hi] - t_[lo];
      const double rate_guess =
          span_before > 0.0 ? static_cast<double>(placed_before_last_) * span_last / span_before : 0.0;
      ncensor_[n_int - 1] = std::min(round_count(rate_guess), nrisk_[n_int - 1]);
    } else {
      ncensor_[n_int - 1] = 0;
    }
    Count sumd = fill_last_interval(false);
    if (!total_events_) return;
    const auto target = static_cast<Count>(*total_events_);

    Count sum_before = 0;
    if (n_int > 1) {
      sum_before = std::accumulate(d_.begin(),
                                   d_.begin() + static_cast<std::ptrdiff_t>(upper_[n_int - 2] + 1),
                                   Count{0});
      if (sum_before >= target) {
        for (std::size_t k = lo; k <= hi; ++k) {
          d_[k] = 0;
          if (k < hi) cen_[k] = 0;
          nhat_[k + 1] = nrisk_[n_int - 1];
        }
        return;
      }
    }
    std::size_t local = 0;
    while (sumd > target || (sumd < target && ncensor_[n_int - 1] > 0)) {
      if (local++ >= kReconstructionIterationCap) {
        hit_cap_ = true;
        break;
      }
      ++iterations_;
      ncensor_[n_int - 1] += sumd - target;
      sumd = fill_last_interval(true);
    }
  }

  std::string label_;
  std::optional<std::size_t> total_events_;
  std::vector<double> t_, s_;
  std::vector<double> risk_t_;
  std::vector<Count> nrisk_;
  std::vector<std::size_t> lower_, upper_, last_i_;
  std::vector<Count> cen_, d_, nhat_, ncensor_;
  std::vector<double> km_hat_;
  Count placed_before_last_ = 0;
  Count nrisk_0_ = 0;
  std::size_t iterations_ = 0;
  bool hit_cap_ = false;
};

}  // namespace

std::pair<ArmData, ArmReconstructionReport> reconstruct_arm(const DigitizedArm& arm) {
  validate_input(arm);
  auto pts = prepare_coordinates(arm);
  GuyotSolver solver(pts, arm.risk_table, arm.total_events, arm.label);
  solver.set_initial(static_cast<Count>(arm.risk_table.front().at_risk));
  solver.run();
  ArmData out = solver.build_arm();

  ArmReconstructionReport report;
  report.label = arm.label;
  report.iterations = solver.iterations();
  report.target_events = arm.total_events;
  report.achieved_events = out.event_count();

  const KmCurve km = km_estimate(out);
  double running = 1.0;
  for (const auto& c : arm.coordinates) {
    running = std::min(running, std::clamp(c.survival, 0.0, 1.0));
    report.max_survival_deviation =
        std::max(report.max_survival_deviation, std::abs(running - km.survival_at(c.time)));
  }
  bool rows_match = true;
  for (const auto& row : arm.risk_table) {
    const auto achieved = static_cast<std::size_t>(
        std::count_if(out.observations().begin(), out.observations().end(),
                      [&](const Observation& o) { return o.time >= row.time; }));
    report.risk_rows.push_back({row.time, row.at_risk, achieved});
    rows_match = rows_match && achieved == row.at_risk;
  }
  report.converged = !solver.hit_cap() && rows_match;
  return {std::move(out), std::move(report)};
}

std::pair<StudyDataset, ReconstructionReport> reconstruct_study(const DigitizedArm& first,
                                                                const DigitizedArm& second,
                                                                std::string study_id) {
  if (first.label == second.label) {
    throw Error(Errc::structure, "study '" + study_id + "': arm labels must be distinct ('" +
                                     first.label + "' given twice)");
  }
  auto run = [](const DigitizedArm& arm) {
    try {
      return reconstruct_arm(arm);
    } catch (const Error& e) {
      const std::string msg = e.what();
      const std::string tag = "arm '" + arm.label + "'";
      throw Error(e.code(), msg.find(tag) == std::string::npos ? tag + ": " + msg : msg);
    }
  };
  auto [arm_a, report_a] = run(first);
  auto [arm_b, report_b] = run(second);
  ReconstructionReport report;
  report.arms.push_back(std::move(report_a));
  report.arms.push_back(std::move(report_b));
  return {StudyDataset(std::move(study_id), std::move(arm_a), std::move(arm_b)), std::move(report)};
}

namespace {

template <typename Row, typename MakeRow>
std::vector<Row> parse_two_column_csv(const std::string& text, std::string_view col0,
                                      std::string_view col1, MakeRow make_row) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (view.empty()) continue;
    auto fields = detail::split_commas(view);
    if (!header_seen) {
      if (fields.size() != 2 || fields[0] != col0 || fields[1] != col1) {
        throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected header '" +
                                     std::string(col0) + "," + std::string(col1) + "'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 2) {
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected 2 fields");
    }
    rows.push_back(make_row(detail::parse_number(fields[0], line_no),
                            detail::parse_number(fields[1], line_no), line_no));
  }
  if (!header_seen) throw Error(Errc::parse, "line 1: missing header");
  return rows;
}

}  // namespace

std::vector<CurvePoint> parse_coordinates_csv(const std::string& text) {
  return parse_two_column_csv<CurvePoint>(text, "time", "survival",
                                          [](double t, double s, std::size_t) {
                                            return CurvePoint{t, s};
                                          });
}

std::vector<RiskRow> parse_risk_table_csv(const std::string& text) {
  return parse_two_column_csv<RiskRow>(
      text, "time", "n_risk", [](double t, double n, std::size_t line_no) {
        if (!(n >= 0.0) || n != std::floor(n)) {
          throw Error(Errc::parse, "line " + std::to_string(line_no) +
                                       ": n_risk must be a non-negative integer");
        }
        return RiskRow{t, static_cast<std::size_t>(n)};
      });
}

std::vector<CurvePoint> load_coordinates(const std::filesystem::path& path) {
  try {
    return parse_coordinates_csv(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::io) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<RiskRow> load_risk_table(const std::filesystem::path& path) {
  try {
    return parse_risk_table_csv(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::io) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::map<std::string, std::optional<std::size_t>> load_total_events(
    const std::filesystem::path& path) {
  std::map<std::string, std::optional<std::size_t>> out;
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    if (!j.contains("total_events")) return out;
    for (const auto& [label, value] : j.at("total_events").items()) {
      out[label] = value.is_null() ? std::nullopt
                                   : std::optional<std::size_t>(value.get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, path.string() + ": " + e.what());
  }
  return out;
}

std::string to_json(const ReconstructionReport& report) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : report.arms) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : a.risk_rows) {
      rows.push_back({{"time", r.time}, {"target", r.target}, {"achieved", r.achieved}});
    }
    arms.push_back({
        {"label", a.label},
        {"max_survival_deviation", a.max_survival_deviation},
        {"risk_rows", rows},
        {"achieved_events", a.achieved_events},
        {"target_events", a.target_events ? nlohmann::json(*a.target_events)
                                          : nlohmann::json("unconstrained")},
        {"iterations", a.iterations},
        {"converged", a.converged},
    });
  }
  return nlohmann::json{{"arms", arms}}.dump(2) + "\n";
}

}  // namespace survbench
