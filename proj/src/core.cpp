#include "survbench/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "survbench/error.hpp"
#include "text_util.hpp"

namespace survbench {

using nlohmann::json;

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::parse: return "parse";
    case Errc::structure: return "structure";
    case Errc::domain: return "domain";
    case Errc::support: return "support";
    case Errc::fit_failure: return "fit_failure";
    case Errc::selection: return "selection";
    case Errc::bandwidth: return "bandwidth";
    case Errc::sampler_stall: return "sampler_stall";
    case Errc::model: return "model";
    case Errc::size: return "size";
    case Errc::infeasible: return "infeasible";
    case Errc::degenerate: return "degenerate";
    case Errc::io: return "io";
    case Errc::summary: return "summary";
  }
  return "unknown";
}

Observation observe(const LatentPair& pair) noexcept {
  const bool event = pair.event_time < pair.censoring_time;
  return {event ? pair.event_time : pair.censoring_time, event};
}

void validate(const Observation& obs) {
  if (!std::isfinite(obs.time) || obs.time < 0.0) {
    throw Error(Errc::domain,
                "observation time must be finite and >= 0, got " + format_double(obs.time));
  }
}

ArmData::ArmData(std::string label, std::vector<Observation> observations)
    : label_(std::move(label)), observations_(std::move(observations)) {
  if (label_.empty()) throw Error(Errc::structure, "arm label must be non-empty");
  if (observations_.empty()) {
    throw Error(Errc::structure, "arm '" + label_ + "' has no observations");
  }
  for (const auto& obs : observations_) validate(obs);
}

std::size_t ArmData::event_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(observations_.begin(), observations_.end(),
                    [](const Observation& o) { return o.event; }));
}

StudyDataset::StudyDataset(std::string study_id, ArmData first, ArmData second)
    : study_id_(std::move(study_id)), arms_{std::move(first), std::move(second)} {
  if (arms_[0].label() == arms_[1].label()) {
    throw Error(Errc::structure, "study '" + study_id_ + "': arm labels must be distinct ('" +
                                     arms_[0].label() + "' given twice)");
  }
}

std::string to_string(CurveClass c) {
  switch (c) {
    case CurveClass::crossing: return "crossing";
    case CurveClass::non_crossing: return "non-crossing";
    case CurveClass::non_crossing_late_effect: return "non-crossing-late-effect";
  }
  return "non-crossing";
}

CurveClass curve_class_from_string(const std::string& s) {
  if (s == "crossing") return CurveClass::crossing;
  if (s == "non-crossing") return CurveClass::non_crossing;
  if (s == "non-crossing-late-effect") return CurveClass::non_crossing_late_effect;
  throw Error(Errc::parse, "unknown curve_class '" + s + "'");
}

void StudyMetadata::validate() const {
  if (!(reported_logrank_p >= 0.0 && reported_logrank_p <= 1.0)) {
    throw Error(Errc::domain, "reported_logrank_p must lie in [0,1]");
  }
  if (reported_hazard_ratio && !(*reported_hazard_ratio > 0.0)) {
    throw Error(Errc::domain, "reported_hazard_ratio must be positive");
  }
  for (const auto& [arm, median] : reported_medians) {
    if (median && !(*median >= 0.0)) {
      throw Error(Errc::domain, "reported median for arm '" + arm + "' must be >= 0");
    }
  }
}

KmCurve::KmCurve(std::vector<KmStep> steps) : steps_(std::move(steps)) {}

double KmCurve::survival_at(double t) const noexcept {
  auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                             [](double v, const KmStep& s) { return v < s.time; });
  if (it == steps_.begin()) return 1.0;
  return std::prev(it)->survival;
}

KmCurve product_limit(std::span<const Observation> observations, bool censoring_as_event) {
  std::vector<Observation> sorted(observations.begin(), observations.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Observation& a, const Observation& b) { return a.time < b.time; });

  std::vector<KmStep> steps;
  double survival = 1.0;
  std::size_t at_risk = sorted.size();
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i].time;
    std::size_t hits = 0;
    std::size_t leaving = 0;
    for (; i < sorted.size() && sorted[i].time == t; ++i, ++leaving) {
      if (sorted[i].event != censoring_as_event) ++hits;
    }
    if (hits > 0) {
      survival *= 1.0 - static_cast<double>(hits) / static_cast<double>(at_risk);
      steps.push_back({t, at_risk, hits, survival});
    }
    at_risk -= leaving;
  }
  return KmCurve(std::move(steps));
}

KmCurve km_estimate(const ArmData& arm) { return product_limit(arm.observations()); }

std::optional<double> median_survival(const KmCurve& curve) {
  for (const auto& step : curve.steps()) {
    if (step.survival <= 0.5) return step.time;
  }
  return std::nullopt;
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error(Errc::io, "cannot format number");
  return std::string(buf, end);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(Errc::io, "write failed for '" + path.string() + "'");
}


using detail::parse_number;
using detail::split_commas;
using detail::trim;

StudyDataset parse_dataset_csv(const std::string& text, std::string study_id) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<std::string> labels;
  std::vector<std::vector<Observation>> groups;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (view.empty()) continue;
    auto fields = split_commas(view);
    if (!header_seen) {
      if (fields.size() != 3 || fields[0] != "arm" || fields[1] != "time" ||
          fields[2] != "status") {
        throw Error(Errc::parse, "line " + std::to_string(line_no) +
                                     ": expected header 'arm,time,status'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) {
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected 3 fields, got " +
                                   std::to_string(fields.size()));
    }
    if (fields[0].empty()) {
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": empty arm label");
    }
    const double time = parse_number(fields[1], line_no);
    if (!std::isfinite(time) || time < 0.0) {
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": time must be finite and >= 0");
    }
    bool event;
    if (fields[2] == "1") {
      event = true;
    } else if (fields[2] == "0") {
      event = false;
    } else {
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": status must be 0 or 1, got '" +
                                   std::string(fields[2]) + "'");
    }
    std::string label(fields[0]);
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
      labels.push_back(label);
      groups.emplace_back();
      it = std::prev(labels.end());
    }
    groups[static_cast<std::size_t>(it - labels.begin())].push_back({time, event});
  }
  if (!header_seen) throw Error(Errc::parse, "line 1: missing header 'arm,time,status'");
  if (labels.size() != 2) {
    throw Error(Errc::structure, "dataset must contain exactly 2 arms, found " +
                                     std::to_string(labels.size()));
  }
  return StudyDataset(std::move(study_id), ArmData(labels[0], std::move(groups[0])),
                      ArmData(labels[1], std::move(groups[1])));
}

StudyDataset load_dataset(const std::filesystem::path& path, std::optional<std::string> study_id) {
  std::string id = study_id ? *study_id : path.stem().string();
  try {
    return parse_dataset_csv(read_text_file(path), std::move(id));
  } catch (const Error& e) {
    if (e.code() == Errc::io) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string format_dataset_csv(const StudyDataset& dataset) {
  std::string out = "arm,time,status\n";
  for (const auto& arm : dataset.arms()) {
    for (const auto& obs : arm.observations()) {
      out += arm.label();
      out += ',';
      out += format_double(obs.time);
      out += obs.event ? ",1\n" : ",0\n";
    }
  }
  return out;
}

void store_dataset(const StudyDataset& dataset, const std::filesystem::path& path) {
  write_text_file(path, format_dataset_csv(dataset));
}

StudyMetadata parse_metadata_json(const std::string& text) {
  StudyMetadata meta;
  try {
    const json j = json::parse(text);
    meta.study_id = j.at("study_id").get<std::string>();
    meta.reported_logrank_p = j.at("reported_logrank_p").get<double>();
    if (j.contains("reported_hazard_ratio") && !j["reported_hazard_ratio"].is_null()) {
      meta.reported_hazard_ratio = j["reported_hazard_ratio"].get<double>();
    }
    if (j.contains("reported_medians")) {
      for (const auto& [arm, value] : j["reported_medians"].items()) {
        meta.reported_medians[arm] =
            value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
      }
    }
    meta.curve_class = curve_class_from_string(j.value("curve_class", std::string("non-crossing")));
  } catch (const json::exception& e) {
    throw Error(Errc::parse, std::string("metadata: ") + e.what());
  }
  meta.validate();
  return meta;
}

StudyMetadata load_metadata(const std::filesystem::path& path) {
  try {
    return parse_metadata_json(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::io) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string format_metadata_json(const StudyMetadata& metadata) {
  json j;
  j["study_id"] = metadata.study_id;
  j["reported_logrank_p"] = metadata.reported_logrank_p;
  j["reported_hazard_ratio"] =
      metadata.reported_hazard_ratio ? json(*metadata.reported_hazard_ratio) : json(nullptr);
  json medians = json::object();
  for (const auto& [arm, median] : metadata.reported_medians) {
    medians[arm] = median ? json(*median) : json(nullptr);
  }
  j["reported_medians"] = medians;
  j["curve_class"] = to_string(metadata.curve_class);
  return j.dump(2) + "\n";
}

void store_metadata(const StudyMetadata& metadata, const std::filesystem::path& path) {
  write_text_file(path, format_metadata_json(metadata));
}

}  // namespace survbench
