#include <doctest.h>

#include <algorithm>
#include <random>

#include "urbanflow/numerics/stats.hpp"
#include "urbanflow/residence.hpp"

using namespace urbanflow;

namespace {

const timeutil::UtcOffset kTz{-4 * 3600};

ingest::AntennaRegistry towers() {
  ingest::AntennaRegistry reg;
  reg.add({"a1", "T1", -33.44, -70.66, false, "", std::nullopt});
  reg.add({"a2", "T2", -33.45, -70.67, false, "", std::nullopt});
  reg.add({"a5", "T5", -33.46, -70.68, false, "", std::nullopt});
  reg.add({"a9", "T9", -33.47, -70.69, false, "", std::nullopt});
  return reg;
}

std::int64_t at(int day, int hour, int minute = 0, int second = 0) {
  // local wall time on synthetic day `day` (2016-08-01 == day 0), UTC-4
  const std::int64_t local_day = timeutil::days_from_civil({2016, 8, 1}) + day;
  return local_day * 86400 + hour * 3600 + minute * 60 + second - kTz.seconds;
}

ingest::EventRecord ev(const std::string& device, std::int64_t ts, const std::string& antenna) {
  return {device, ts, antenna, 0, 0};
}

}  // namespace

TEST_CASE("daily endpoints pick first before 08:00 and last after 22:00") {
  const auto reg = towers();
  const std::vector<ingest::EventRecord> events{
      ev("d", at(0, 7, 30), "a1"),
      ev("d", at(0, 23, 0), "a1"),
  };
  const auto days = residence::daily_endpoints(events, reg, kTz);
  REQUIRE(days.size() == 1);
  CHECK(days.begin()->second.first_tower == "T1");
  CHECK(days.begin()->second.last_tower == "T1");
}

TEST_CASE("daytime-only events produce no endpoints") {
  const auto reg = towers();
  std::vector<ingest::EventRecord> events;
  for (int h = 9; h <= 21; ++h) events.push_back(ev("d", at(0, h), "a1"));
  CHECK(residence::daily_endpoints(events, reg, kTz).empty());
}

TEST_CASE("boundary times are strict") {
  const auto reg = towers();
  // exactly 08:00 is not before 08:00; exactly 22:00 is not after 22:00
  const std::vector<ingest::EventRecord> events{
      ev("d", at(0, 8, 0, 0), "a1"),
      ev("d", at(0, 22, 0, 0), "a1"),
      ev("d", at(0, 7, 59, 59), "a2"),
      ev("d", at(0, 22, 0, 1), "a2"),
  };
  const auto days = residence::daily_endpoints(events, reg, kTz);
  REQUIRE(days.size() == 1);
  CHECK(days.begin()->second.first_tower == "T2");
  CHECK(days.begin()->second.last_tower == "T2");
}

TEST_CASE("earliest and latest are chosen within the windows") {
  const auto reg = towers();
  const std::vector<ingest::EventRecord> events{
      ev("d", at(0, 6, 0), "a2"),  // earliest morning wins
      ev("d", at(0, 7, 0), "a1"),
      ev("d", at(0, 22, 30), "a1"),
      ev("d", at(0, 23, 30), "a5"),  // latest evening wins
  };
  const auto days = residence::daily_endpoints(events, reg, kTz);
  CHECK(days.begin()->second.first_tower == "T2");
  CHECK(days.begin()->second.last_tower == "T5");
}

TEST_CASE("thirty planted days all resolve to the home tower") {
  const auto reg = towers();
  std::vector<ingest::EventRecord> events;
  for (int day = 0; day < 30; ++day) {
    events.push_back(ev("d", at(day, 7, 0), "a5"));
    events.push_back(ev("d", at(day, 23, 30), "a5"));
  }
  const auto days = residence::daily_endpoints(events, reg, kTz);
  CHECK(days.size() == 30);
  for (const auto& [day, eps] : days) {
    CHECK(eps.first_tower == "T5");
    CHECK(eps.last_tower == "T5");
  }
}

TEST_CASE("endpoint extraction is order independent") {
  const auto reg = towers();
  std::vector<ingest::EventRecord> events;
  for (int day = 0; day < 5; ++day) {
    events.push_back(ev("d", at(day, 6, 15), "a1"));
    events.push_back(ev("d", at(day, 7, 45), "a2"));
    events.push_back(ev("d", at(day, 22, 10), "a5"));
    events.push_back(ev("d", at(day, 23, 55), "a9"));
  }
  auto shuffled = events;
  std::mt19937_64 rng(3);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto a = residence::daily_endpoints(events, reg, kTz);
  const auto b = residence::daily_endpoints(shuffled, reg, kTz);
  REQUIRE(a.size() == b.size());
  for (const auto& [day, eps] : a) {
    CHECK(b.at(day).first_tower == eps.first_tower);
    CHECK(b.at(day).last_tower == eps.last_tower);
  }
}

namespace {

residence::EndpointsByDay single_endpoint_days(const std::vector<std::string>& towers_per_day) {
  residence::EndpointsByDay days;
  std::int64_t day = 17014;
  for (const auto& tower : towers_per_day) {
    residence::DayEndpoints d;
    d.first_tower = tower;
    days.emplace(day++, d);
  }
  return days;
}

}  // namespace

TEST_CASE("infer_home applies both thresholds inclusively") {
  const auto reg = towers();
  const residence::HomeThresholds thresholds{0.8, 0.6};

  // 25 of 30 days observed, 20/25 observations on T1: shares 0.833 and 0.8
  std::vector<std::string> sequence(20, "T1");
  sequence.insert(sequence.end(), 5, "T2");
  auto home = residence::infer_home("d", single_endpoint_days(sequence), 30, reg, thresholds);
  REQUIRE(home.has_value());
  CHECK(home->home_tower_id == "T1");
  CHECK(home->home_antenna_id == "a1");
  CHECK(home->days_observed == 25);
  CHECK(home->top_tower_share == doctest::Approx(0.8));

  // 20 of 30 days observed: 0.667 < 0.8, rejected
  residence::HomeRejection rejection;
  auto rejected = residence::infer_home("d", single_endpoint_days(std::vector<std::string>(20, "T1")),
                                        30, reg, thresholds, &rejection);
  CHECK_FALSE(rejected.has_value());
  CHECK(rejection.reason == "low_day_coverage");

  // exactly at both boundaries: 24/30 = 0.8 coverage, 60% share retained
  std::vector<std::string> boundary(15, "T1");  // 15/24 = 0.625 >= 0.6
  boundary.insert(boundary.end(), 9, "T2");
  auto kept = residence::infer_home("d", single_endpoint_days(boundary), 30, reg, thresholds);
  REQUIRE(kept.has_value());

  std::vector<std::string> exact(12, "T1");  // 12/20 = 0.6 exactly
  exact.insert(exact.end(), 8, "T2");
  auto exact_share =
      residence::infer_home("d", single_endpoint_days(exact), 25, reg, thresholds);
  REQUIRE(exact_share.has_value());  // 20/25 = 0.8 coverage, 0.6 share, both inclusive
  CHECK(exact_share->top_tower_share == doctest::Approx(0.6));

  std::vector<std::string> low_share(11, "T1");  // 11/20 = 0.55 < 0.6
  low_share.insert(low_share.end(), 9, "T2");
  auto dropped =
      residence::infer_home("d", single_endpoint_days(low_share), 25, reg, thresholds, &rejection);
  CHECK_FALSE(dropped.has_value());
  CHECK(rejection.reason == "low_tower_share");
}

TEST_CASE("modal ties break on the smallest antenna id") {
  const auto reg = towers();
  const residence::HomeThresholds thresholds{0.8, 0.5};
  // two towers tied 10/10 in 20 observed days of 24
  std::vector<std::string> tied(10, "T5");
  tied.insert(tied.end(), 10, "T1");
  auto home = residence::infer_home("d", single_endpoint_days(tied), 24, reg, thresholds);
  REQUIRE(home.has_value());
  CHECK(home->home_antenna_id == "a1");  // a1 < a5
  CHECK(home->home_tower_id == "T1");
}

TEST_CASE("no endpoints is its own rejection reason") {
  const auto reg = towers();
  residence::HomeRejection rejection;
  auto home = residence::infer_home("d", {}, 30, reg, {0.8, 0.6}, &rejection);
  CHECK_FALSE(home.has_value());
  CHECK(rejection.reason == "no_endpoints");
}

TEST_CASE("a full day pools first and last into one multiset") {
  const auto reg = towers();
  residence::EndpointsByDay days;
  for (int d = 0; d < 10; ++d) {
    residence::DayEndpoints e;
    e.first_tower = "T1";
    e.last_tower = d < 4 ? "T2" : "T1";  // 16 T1 observations of 20
    days.emplace(17014 + d, e);
  }
  auto home = residence::infer_home("d", days, 10, reg, {0.8, 0.6});
  REQUIRE(home.has_value());
  CHECK(home->top_tower_share == doctest::Approx(0.8));
}

TEST_CASE("compute_hdi is the geometric mean") {
  CHECK(residence::compute_hdi(1, 1, 1) == doctest::Approx(1.0));
  CHECK(residence::compute_hdi(0.8, 0.8, 0.8) == doctest::Approx(0.8));
  CHECK(residence::compute_hdi(0.9, 0.8, 0.7) == doctest::Approx(0.7958).epsilon(1e-4));
  // symmetric under permutations
  CHECK(residence::compute_hdi(0.9, 0.8, 0.7) == doctest::Approx(residence::compute_hdi(0.7, 0.9, 0.8)));
  CHECK_THROWS_AS(residence::compute_hdi(0.0, 0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(residence::compute_hdi(0.5, -0.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(residence::compute_hdi(0.5, 0.5, 1.2), std::invalid_argument);
}

namespace {

residence::HomeAssignment home_in(const std::string& device, const std::string& comuna) {
  residence::HomeAssignment h;
  h.device_id = device;
  h.comuna_id = comuna;
  return h;
}

}  // namespace

TEST_CASE("census correlation on exact and inverted rankings") {
  std::unordered_map<std::string, double> census{{"C1", 100}, {"C2", 200}, {"C3", 300}};
  std::vector<residence::HomeAssignment> proportional;
  for (int i = 0; i < 1; ++i) proportional.push_back(home_in("a" + std::to_string(i), "C1"));
  for (int i = 0; i < 2; ++i) proportional.push_back(home_in("b" + std::to_string(i), "C2"));
  for (int i = 0; i < 3; ++i) proportional.push_back(home_in("c" + std::to_string(i), "C3"));
  CHECK(residence::census_correlation(proportional, census) == doctest::Approx(1.0));

  // counts reversed against a symmetric census vector
  std::vector<residence::HomeAssignment> reversed;
  for (int i = 0; i < 3; ++i) reversed.push_back(home_in("a" + std::to_string(i), "C1"));
  for (int i = 0; i < 2; ++i) reversed.push_back(home_in("b" + std::to_string(i), "C2"));
  for (int i = 0; i < 1; ++i) reversed.push_back(home_in("c" + std::to_string(i), "C3"));
  CHECK(residence::census_correlation(reversed, census) == doctest::Approx(-1.0));

  CHECK_THROWS_AS(residence::census_correlation({home_in("x", "C1")}, census),
                  std::invalid_argument);
}

TEST_CASE("homes sampled proportionally to census correlate strongly") {
  // 50k devices, homes multinomial on census populations
  std::mt19937_64 rng(97);
  std::vector<std::string> comunas;
  std::vector<double> pops;
  std::unordered_map<std::string, double> census;
  for (int i = 0; i < 30; ++i) {
    const std::string id = "C" + std::to_string(i);
    const double pop = 1000.0 + 900.0 * i;
    comunas.push_back(id);
    pops.push_back(pop);
    census[id] = pop;
  }
  std::discrete_distribution<int> pick(pops.begin(), pops.end());
  std::vector<residence::HomeAssignment> homes;
  homes.reserve(50000);
  for (int d = 0; d < 50000; ++d)
    homes.push_back(home_in("d" + std::to_string(d), comunas[static_cast<std::size_t>(pick(rng))]));
  CHECK(residence::census_correlation(homes, census) >= 0.95);
}

TEST_CASE("hdi quantiles: uniform values split evenly") {
  std::vector<double> values;
  for (int i = 1; i <= 100; ++i) values.push_back(i / 1000.0);
  const auto table = residence::quantize_hdi(values, 5);
  REQUIRE(table.counts.size() == 5);
  for (auto c : table.counts) CHECK(c == 20);
  CHECK(table.labels.front() == "Q1");
  CHECK(table.labels.back() == "Q5");
  // boundaries strictly increasing, bins partition the range
  for (std::size_t i = 1; i < table.boundaries.size(); ++i)
    CHECK(table.boundaries[i] > table.boundaries[i - 1]);
}

TEST_CASE("hdi quantiles keep tied values in one bin") {
  // comuna-style: few distinct values with large multiplicities
  std::vector<double> values;
  const std::vector<std::pair<double, int>> blocks{
      {0.70, 220}, {0.73, 180}, {0.76, 210}, {0.80, 260}, {0.86, 120}, {0.95, 10}};
  for (auto [v, n] : blocks) values.insert(values.end(), n, v);
  const auto table = residence::quantize_hdi(values, 5);

  std::size_t total = 0;
  bool unequal = false;
  for (auto c : table.counts) {
    total += c;
    if (c != values.size() / 5) unequal = true;
  }
  CHECK(total == values.size());  // union of bins is the input set
  CHECK(unequal);                 // ties force unequal counts

  // devices sharing a value never split: every block lands in one bin
  for (auto [v, n] : blocks) {
    (void)n;
    const std::size_t bin = table.bin_of(v);
    CHECK(bin < table.counts.size());
  }
  // labels monotone in HDI
  CHECK(table.bin_of(0.70) <= table.bin_of(0.76));
  CHECK(table.bin_of(0.76) <= table.bin_of(0.95));
}

TEST_CASE("hdi quantiles demand enough distinct values") {
  std::vector<double> three{0.1, 0.1, 0.2, 0.2, 0.3, 0.3};
  CHECK_THROWS_AS(residence::quantize_hdi(three, 5), std::invalid_argument);
  CHECK_THROWS_AS(residence::quantize_hdi(three, 1), std::invalid_argument);
  // k = number of distinct values: one value per bin
  const auto table = residence::quantize_hdi(three, 3);
  CHECK(table.counts == std::vector<std::size_t>{2, 2, 2});
}
