#include <catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "survbench/core.hpp"
#include "survbench/error.hpp"
#include "survbench/random.hpp"

using namespace survbench;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no survbench::Error thrown");
  return Errc::invalid_argument;
}

ArmData four_obs() { return ArmData("A", {{1, true}, {2, false}, {3, true}, {4, false}}); }

}  // namespace

TEST_CASE("observe takes the minimum and counts ties as censored") {
  CHECK(observe({2.0, 5.0}) == Observation{2.0, true});
  CHECK(observe({5.0, 2.0}) == Observation{2.0, false});
  CHECK(observe({3.0, 3.0}) == Observation{3.0, false});
}

TEST_CASE("observation validation") {
  CHECK_NOTHROW(validate(Observation{0.0, true}));
  CHECK(code_of([] { validate(Observation{-1.0, true}); }) == Errc::domain);
  CHECK(code_of([] { validate(Observation{std::nan(""), false}); }) == Errc::domain);
}

TEST_CASE("arm and study invariants") {
  CHECK(code_of([] { ArmData("A", {}); }) == Errc::structure);
  CHECK(code_of([] { ArmData("", {{1, true}}); }) == Errc::structure);
  CHECK(code_of([] { StudyDataset("s", ArmData("A", {{1, true}}), ArmData("A", {{2, true}})); }) ==
        Errc::structure);
  StudyDataset d("s", ArmData("A", {{1, true}}), ArmData("B", {{2, false}, {3, true}}));
  CHECK(d.size() == 3);
  CHECK(d.arm(1).event_count() == 1);
}

TEST_CASE("km_estimate on the four-observation arm") {
  const auto km = km_estimate(four_obs());
  REQUIRE(km.steps().size() == 2);
  CHECK(km.steps()[0].time == 1);
  CHECK(km.steps()[0].at_risk == 4);
  CHECK(km.steps()[0].events == 1);
  CHECK(km.steps()[0].survival == 0.75);
  CHECK(km.steps()[1].time == 3);
  CHECK(km.steps()[1].at_risk == 2);
  CHECK(km.steps()[1].events == 1);
  CHECK(km.steps()[1].survival == 0.375);
  CHECK(km.survival_at(0.5) == 1.0);
  CHECK(km.survival_at(1.0) == 0.75);
  CHECK(km.survival_at(2.9) == 0.75);
  CHECK(km.survival_at(10) == 0.375);
}

TEST_CASE("km_estimate edge cases") {
  const auto none = km_estimate(ArmData("A", {{1, false}, {2, false}}));
  CHECK(none.empty());
  CHECK(none.survival_at(5) == 1.0);

  const auto tied = km_estimate(ArmData("A", {{1, true}, {1, true}}));
  REQUIRE(tied.steps().size() == 1);
  CHECK(tied.steps()[0].at_risk == 2);
  CHECK(tied.steps()[0].events == 2);
  CHECK(tied.steps()[0].survival == 0.0);
}

TEST_CASE("km_estimate properties on random arms") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    oracle::SyntheticArm spec;
    spec.n = 60;
    const ArmData arm = oracle::synthetic_arm("A", spec, seed);
    const auto km = km_estimate(arm);
    double prev = 1.0;
    std::size_t prev_risk = arm.size() + 1;
    double prev_time = -1;
    for (const auto& s : km.steps()) {
      CHECK(s.survival <= prev);
      CHECK(s.survival >= 0.0);
      CHECK(s.at_risk < prev_risk);
      CHECK(s.time > prev_time);
      prev = s.survival;
      prev_risk = s.at_risk;
      prev_time = s.time;
      CHECK_THAT(s.survival, WithinAbs(oracle::km_at(arm.observations(), s.time), 1e-12));
    }
  }
}

TEST_CASE("without censoring the KM estimate is the empirical survival function") {
  RandomStream rng(7, 0);
  std::vector<Observation> obs;
  for (int i = 0; i < 50; ++i) obs.push_back({std::floor(rng.uniform(0, 20)), true});
  const ArmData arm("A", obs);
  const auto km = km_estimate(arm);
  for (double t = 0; t < 21; t += 0.5) {
    double above = 0;
    for (const auto& o : obs) above += o.time > t ? 1 : 0;
    CHECK_THAT(km.survival_at(t), WithinAbs(above / 50.0, 1e-12));
  }
}

TEST_CASE("median_survival") {
  CHECK(median_survival(km_estimate(four_obs())) == 3.0);
  const ArmData high("A", {{1, true}, {2, false}, {3, false}, {4, false}, {5, false}});
  CHECK_FALSE(median_survival(km_estimate(high)).has_value());
  const KmCurve exact({{7.0, 2, 1, 0.5}});
  CHECK(median_survival(exact) == 7.0);
}

TEST_CASE("dataset CSV parsing") {
  const auto d = parse_dataset_csv("arm,time,status\nA,1,1\nB,2,0\n", "s");
  CHECK(d.arm(0).label() == "A");
  CHECK(d.arm(0).size() == 1);
  CHECK(d.arm(1).size() == 1);
  CHECK(d.arm(1).observations()[0] == Observation{2, false});

  CHECK(code_of([] { parse_dataset_csv("arm,time,status\nA,1,1\nB,2,0\nC,3,1\n", "s"); }) ==
        Errc::structure);
  CHECK(code_of([] { parse_dataset_csv("arm,time,status\nA,1,1\n", "s"); }) == Errc::structure);
  CHECK(code_of([] { parse_dataset_csv("arm,time,status\nA,1,1\nB,x,0\n", "s"); }) == Errc::parse);
  CHECK(code_of([] { parse_dataset_csv("arm,time,status\nA,1,2\nB,1,0\n", "s"); }) == Errc::parse);
  CHECK(code_of([] { parse_dataset_csv("arm,time\nA,1\n", "s"); }) == Errc::parse);
  try {
    parse_dataset_csv("arm,time,status\nA,1,1\nB,2\n", "s");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK_THAT(e.what(), ContainsSubstring("line 3"));
  }
}

TEST_CASE("dataset store then load is the identity") {
  RandomStream rng(11, 3);
  std::vector<Observation> a, b;
  for (int i = 0; i < 50; ++i) a.push_back({rng.uniform(0, 100), rng.uniform() < 0.6});
  for (int i = 0; i < 50; ++i) b.push_back({rng.uniform(0, 100) / 3.0, rng.uniform() < 0.6});
  const StudyDataset d("roundtrip", ArmData("control", a), ArmData("treatment", b));
  const auto path = std::filesystem::temp_directory_path() / "roundtrip.csv";
  store_dataset(d, path);
  CHECK(load_dataset(path) == d);
  CHECK(load_dataset(path, "other").study_id() == "other");
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_dataset(path); }) == Errc::io);
}

TEST_CASE("metadata JSON round trip and validation") {
  StudyMetadata m;
  m.study_id = "s1";
  m.reported_logrank_p = 0.03;
  m.reported_hazard_ratio = 0.7;
  m.reported_medians = {{"A", 12.5}, {"B", std::nullopt}};
  m.curve_class = CurveClass::non_crossing_late_effect;
  CHECK(parse_metadata_json(format_metadata_json(m)) == m);

  m.reported_logrank_p = 1.5;
  CHECK(code_of([&] { m.validate(); }) == Errc::domain);
  CHECK(code_of([] { parse_metadata_json("{nope"); }) == Errc::parse);
  CHECK(curve_class_from_string(to_string(CurveClass::crossing)) == CurveClass::crossing);
}

TEST_CASE("random streams replay and separate") {
  RandomStream a(42, 1), b(42, 1), c(42, 2);
  std::vector<double> xa, xb, xc;
  for (int i = 0; i < 100; ++i) {
    xa.push_back(a.uniform());
    xb.push_back(b.uniform());
    xc.push_back(c.uniform());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);

  RandomStream base(5, 0);
  auto s1 = base.substream(1), s1b = base.substream(1), s2 = base.substream(2);
  CHECK(s1() == s1b());
  CHECK(s1.stream_id() != s2.stream_id());

  RandomStream r(9, 9);
  double sum = 0, sumsq = 0;
  std::vector<int> bins(4, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sumsq += z * z;
    ++bins[r.index(4)];
    const double u = r.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
  CHECK_THAT(sum / n, WithinAbs(0.0, 0.01));
  CHECK_THAT(sumsq / n, WithinAbs(1.0, 0.02));
  for (int k : bins) CHECK_THAT(k / double(n), WithinAbs(0.25, 0.005));
}
