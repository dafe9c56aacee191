#include <doctest.h>

#include <random>
#include <set>

#include "urbanflow/visits.hpp"

using namespace urbanflow;

namespace {

const timeutil::UtcOffset kTz{-4 * 3600};

ingest::AntennaRegistry mall_registry() {
  ingest::AntennaRegistry reg;
  reg.add({"m1a", "tm1", -33.50, -70.70, true, "MALL A", "MA"});
  reg.add({"m1b", "tm1", -33.50, -70.70, true, "MALL A", "MA"});
  reg.add({"m2a", "tm2", -33.40, -70.60, true, "MALL B", "MB"});
  reg.add({"street", "t9", -33.45, -70.65, false, "street", std::nullopt});
  return reg;
}

std::int64_t at(int day, int hour) {
  const std::int64_t local_day = timeutil::days_from_civil({2016, 8, 1}) + day;
  return local_day * 86400 + hour * 3600 - kTz.seconds;
}

ingest::EventRecord ev(const std::string& device, std::int64_t ts, const std::string& antenna) {
  return {device, ts, antenna, 0, 0};
}

}  // namespace

TEST_CASE("multiple same-day events collapse into one visit row") {
  const auto reg = mall_registry();
  std::vector<ingest::EventRecord> events;
  for (int h = 10; h < 15; ++h) events.push_back(ev("d", at(0, h), "m1a"));
  const auto table = visits::detect_visits(events, reg, kTz);
  CHECK(table.row_count() == 1);
  const auto rows = table.rows();
  CHECK(rows[0].mall_id == "MA");
}

TEST_CASE("two malls on the same day give two rows") {
  const auto reg = mall_registry();
  const std::vector<ingest::EventRecord> events{
      ev("d", at(0, 10), "m1a"),
      ev("d", at(0, 15), "m2a"),
      ev("d", at(0, 12), "street"),  // not a mall antenna
  };
  const auto table = visits::detect_visits(events, reg, kTz);
  CHECK(table.row_count() == 2);
}

TEST_CASE("visit detection is idempotent under stream duplication") {
  const auto reg = mall_registry();
  std::vector<ingest::EventRecord> events{
      ev("d1", at(0, 10), "m1a"), ev("d1", at(1, 11), "m1b"), ev("d2", at(0, 12), "m2a")};
  auto doubled = events;
  doubled.insert(doubled.end(), events.begin(), events.end());
  const auto once = visits::detect_visits(events, reg, kTz);
  const auto twice = visits::detect_visits(doubled, reg, kTz);
  CHECK(once.row_count() == twice.row_count());
  const auto a = once.rows();
  const auto b = twice.rows();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].device_id == b[i].device_id);
    CHECK(a[i].mall_id == b[i].mall_id);
    CHECK(a[i].day == b[i].day);
  }
}

TEST_CASE("planted visit schedule is recovered exactly") {
  const auto reg = mall_registry();
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> day(0, 27), hour(10, 20);
  std::set<std::tuple<std::string, std::string, int>> planted;
  std::vector<ingest::EventRecord> events;
  for (int d = 0; d < 50; ++d) {
    const std::string device = "d" + std::to_string(d);
    for (int v = 0; v < 3; ++v) {
      const int dd = day(rng);
      const bool mall_a = (d + v) % 2 == 0;
      planted.insert({device, mall_a ? "MA" : "MB", dd});
      events.push_back(ev(device, at(dd, hour(rng)), mall_a ? "m1a" : "m2a"));
    }
  }
  const auto table = visits::detect_visits(events, reg, kTz);
  CHECK(table.row_count() == planted.size());
  for (const auto& row : table.rows()) {
    const int d = static_cast<int>(row.day - timeutil::days_from_civil({2016, 8, 1}));
    CHECK(planted.count({row.device_id, row.mall_id, d}) == 1);
  }
}

TEST_CASE("non-visitor filter keeps exactly-at-threshold devices") {
  visits::VisitTable table;
  for (int i = 0; i < 10; ++i) table.add("at10", "MA", i);
  for (int i = 0; i < 11; ++i) table.add("at11", "MA", i);
  table.add("light", "MB", 0);

  const auto result = visits::filter_nonvisitors(table, 10);
  CHECK(result.discarded_devices == std::vector<std::string>{"at11"});
  CHECK(result.customers.by_device().count("at10") == 1);
  CHECK(result.customers.by_device().count("light") == 1);
  CHECK(result.customers.by_device().count("at11") == 0);
  // atomic removal: none of at11's rows survive
  for (const auto& row : result.customers.rows()) CHECK(row.device_id != "at11");
}

TEST_CASE("day-presences count (device, mall, day) rows") {
  visits::VisitTable table;
  // 6 days, two malls each day: 12 presences > 10 even though days = 6
  for (int i = 0; i < 6; ++i) {
    table.add("multi", "MA", i);
    table.add("multi", "MB", i);
  }
  const auto result = visits::filter_nonvisitors(table, 10);
  CHECK(result.discarded_devices.size() == 1);
}

TEST_CASE("empty table filters to empty outputs") {
  const auto result = visits::filter_nonvisitors(visits::VisitTable{}, 10);
  CHECK(result.customers.row_count() == 0);
  CHECK(result.discarded_devices.empty());
}

TEST_CASE("presence histogram pigeonholes and conserves devices") {
  visits::VisitTable table;
  for (int i = 0; i < 3; ++i) table.add("three_one", "MA", i);
  table.add("one_one", "MB", 0);
  table.add("two_two", "MA", 0);
  table.add("two_two", "MB", 1);

  const auto hist = visits::presence_histogram(table);
  CHECK(hist.at({3, 1}) == 1);
  CHECK(hist.at({1, 1}) == 1);
  CHECK(hist.at({2, 2}) == 1);

  std::size_t mass = 0;
  for (const auto& [key, count] : hist) {
    CHECK(key.second <= key.first);  // y <= x always
    mass += count;
  }
  CHECK(mass == table.by_device().size());
}

TEST_CASE("unique visitors per mall match a brute-force set oracle") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> dev(0, 40), mall(0, 4), day(0, 27);
  visits::VisitTable table;
  std::map<std::string, std::set<std::string>> oracle;
  for (int i = 0; i < 800; ++i) {
    const std::string d = "d" + std::to_string(dev(rng));
    const std::string m = "M" + std::to_string(mall(rng));
    table.add(d, m, day(rng));
    oracle[m].insert(d);
  }
  const auto counts = table.unique_visitors_per_mall();
  for (const auto& [m, devices] : oracle) CHECK(counts.at(m) == devices.size());
  const auto sets = table.visitor_sets();
  for (const auto& [m, devices] : oracle) CHECK(sets.at(m) == devices);
}

namespace {

residence::HomeAssignment home_in(const std::string& device, const std::string& comuna) {
  residence::HomeAssignment h;
  h.device_id = device;
  h.comuna_id = comuna;
  return h;
}

}  // namespace

TEST_CASE("comuna-mall matrix row normalization") {
  visits::VisitTable table;
  table.add("d1", "MA", 0);
  const auto single =
      visits::comuna_mall_matrix(table, {home_in("d1", "C1")});
  REQUIRE(single.comunas.size() == 1);
  REQUIRE(single.malls.size() == 1);
  CHECK(single.shares[0][0] == doctest::Approx(1.0));

  // planted 70/30 split from one comuna
  visits::VisitTable split;
  std::vector<residence::HomeAssignment> homes;
  for (int i = 0; i < 10; ++i) {
    const std::string d = "d" + std::to_string(i);
    homes.push_back(home_in(d, "C1"));
    for (int v = 0; v < 7; ++v) split.add(d, "MA", v);
    for (int v = 0; v < 3; ++v) split.add(d, "MB", 10 + v);
  }
  homes.push_back(home_in("silent", "C2"));  // no visits: zero row
  const auto m = visits::comuna_mall_matrix(split, homes);
  REQUIRE(m.comunas.size() == 2);
  const std::size_t c1 = m.comunas[0] == "C1" ? 0 : 1;
  const std::size_t ma = m.malls[0] == "MA" ? 0 : 1;
  CHECK(m.shares[c1][ma] == doctest::Approx(0.7));
  CHECK(m.shares[c1][1 - ma] == doctest::Approx(0.3));
  CHECK(m.zero_rows == std::vector<std::string>{"C2"});

  for (std::size_t c = 0; c < m.comunas.size(); ++c) {
    double row = 0;
    for (double v : m.shares[c]) row += v;
    const bool flagged =
        std::find(m.zero_rows.begin(), m.zero_rows.end(), m.comunas[c]) != m.zero_rows.end();
    CHECK(row == doctest::Approx(flagged ? 0.0 : 1.0));
  }
}
