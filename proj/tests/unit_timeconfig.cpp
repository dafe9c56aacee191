#include <doctest.h>

#include <sstream>

#include "support/tmpdir.hpp"
#include "urbanflow/config.hpp"
#include "urbanflow/csv.hpp"
#include "urbanflow/timeutil.hpp"

using namespace urbanflow;

TEST_CASE("civil date round trip") {
  CHECK(timeutil::days_from_civil({1970, 1, 1}) == 0);
  CHECK(timeutil::days_from_civil({2016, 8, 1}) == 17014);
  for (std::int64_t d : {-1000L, 0L, 17014L, 20000L})
    CHECK(timeutil::days_from_civil(timeutil::civil_from_days(d)) == d);
  CHECK(timeutil::parse_date("2016-08-01") == timeutil::CivilDate{2016, 8, 1});
  CHECK_FALSE(timeutil::parse_date("2016-02-30").has_value());
  CHECK_FALSE(timeutil::parse_date("not-a-date").has_value());
  CHECK(timeutil::format_date({2016, 8, 1}) == "2016-08-01");
}

TEST_CASE("utc offsets parse in the accepted spellings") {
  CHECK(timeutil::UtcOffset::parse("-04:00")->seconds == -4 * 3600);
  CHECK(timeutil::UtcOffset::parse("+05:30")->seconds == 5 * 3600 + 1800);
  CHECK(timeutil::UtcOffset::parse("-04")->seconds == -4 * 3600);
  CHECK(timeutil::UtcOffset::parse("UTC-04")->seconds == -4 * 3600);
  CHECK(timeutil::UtcOffset::parse("Z")->seconds == 0);
  CHECK(timeutil::UtcOffset::parse("-0400")->seconds == -4 * 3600);
  CHECK_FALSE(timeutil::UtcOffset::parse("America/Santiago").has_value());
  CHECK_FALSE(timeutil::UtcOffset::parse("").has_value());
}

TEST_CASE("iso-8601 and epoch timestamps") {
  // 2016-08-01T07:30:00-04:00 == 2016-08-01T11:30:00Z
  const auto t = timeutil::parse_timestamp("2016-08-01T07:30:00-04:00", false);
  REQUIRE(t.has_value());
  CHECK(*t == 17014 * 86400 + 11 * 3600 + 30 * 60);
  CHECK(timeutil::parse_timestamp("2016-08-01 07:30:00Z", false).value() ==
        17014 * 86400 + 7 * 3600 + 30 * 60);
  CHECK(timeutil::parse_timestamp("2016-08-01T07:30:00.25-04:00", false).value() == *t);
  CHECK_FALSE(timeutil::parse_timestamp("2016-08-01T25:30:00Z", false).has_value());
  CHECK(timeutil::parse_timestamp("1470051000", true).value() == 1470051000);
  CHECK_FALSE(timeutil::parse_timestamp("147x", true).has_value());

  CHECK(timeutil::looks_like_epoch("1470051000"));
  CHECK_FALSE(timeutil::looks_like_epoch("2016-08-01T07:30:00Z"));

  const timeutil::UtcOffset tz{-4 * 3600};
  CHECK(timeutil::format_iso8601(*t, tz) == "2016-08-01T07:30:00-04:00");
  CHECK(timeutil::parse_timestamp(timeutil::format_iso8601(*t, tz), false).value() == *t);
}

TEST_CASE("local day and second-of-day under an offset") {
  const timeutil::UtcOffset tz{-4 * 3600};
  const auto lt = timeutil::to_local(17014 * 86400 + 11 * 3600 + 30 * 60, tz);
  CHECK(lt.day == 17014);
  CHECK(lt.seconds_of_day == 7 * 3600 + 30 * 60);
  // negative epoch
  const auto lt2 = timeutil::to_local(-1, timeutil::UtcOffset{0});
  CHECK(lt2.day == -1);
  CHECK(lt2.seconds_of_day == 86399);
}

TEST_CASE("csv split and escape round trip") {
  CHECK(csv::split_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(csv::split_line("a,\"b,1\",c") == std::vector<std::string>{"a", "b,1", "c"});
  CHECK(csv::split_line("a,\"say \"\"hi\"\"\",c") ==
        std::vector<std::string>{"a", "say \"hi\"", "c"});
  CHECK(csv::split_line("a,b,c\r") == std::vector<std::string>{"a", "b", "c"});
  const std::vector<std::string> row{"plain", "with,comma", "with\"quote"};
  CHECK(csv::split_line(csv::join_row(row)) == row);
}

TEST_CASE("csv reader requires a header and reports line numbers") {
  std::istringstream empty("");
  CHECK_THROWS_AS(csv::Reader(empty, "x"), std::runtime_error);

  std::istringstream in("a,b\n1,2\n\n3,4\n");
  csv::Reader r(in, "t");
  CHECK(r.column("a") == 0);
  CHECK_THROWS_AS(r.column("missing"), std::runtime_error);
  std::vector<std::string> f;
  CHECK(r.next(f));
  CHECK(r.line_number() == 2);
  CHECK(r.next(f));
  CHECK(r.line_number() == 4);  // blank line skipped
  CHECK_FALSE(r.next(f));
}

TEST_CASE("toml subset parser") {
  std::istringstream in(
      "seed = 42\n"
      "name = \"demo # not a comment\"  # trailing comment\n"
      "ratio = 0.5\n"
      "flag = true\n"
      "words = [\"a\", \"b\"]\n"
      "[section]\n"
      "key = -3\n"
      "[a.b]\n"
      "deep = 1\n");
  const auto t = config::Toml::parse(in, "test");
  CHECK(t.get_int("seed") == 42);
  CHECK(t.get_string("name") == "demo # not a comment");
  CHECK(t.get_double("ratio") == doctest::Approx(0.5));
  CHECK(t.get_double("seed") == doctest::Approx(42.0));  // int promotes
  CHECK(t.get_bool("flag"));
  CHECK(t.get_string_array("words") == std::vector<std::string>{"a", "b"});
  CHECK(t.get_int("section.key") == -3);
  CHECK(t.get_int("a.b.deep") == 1);
  CHECK(t.get_int("absent", 7) == 7);
  CHECK_THROWS_AS(t.get_int("absent"), config::ConfigError);
  CHECK_THROWS_AS(t.get_int("name"), config::ConfigError);

  std::istringstream bad("key value\n");
  CHECK_THROWS_AS(config::Toml::parse(bad, "bad"), config::ConfigError);
  std::istringstream dup("a = 1\na = 2\n");
  CHECK_THROWS_AS(config::Toml::parse(dup, "dup"), config::ConfigError);
}

TEST_CASE("pipeline config defaults, validation and paths") {
  testsupport::TmpDir tmp("cfg");
  {
    auto f = csv::open_output(tmp.str("pipeline.toml"));
    f << "seed = 9\n[inputs]\nevents = \"ev.csv\"\n";
  }
  const auto cfg = config::PipelineConfig::from_file(tmp.str("pipeline.toml"));
  CHECK(cfg.visitor_max_presences == 10);
  CHECK(cfg.day_coverage == doctest::Approx(0.8));
  CHECK(cfg.tower_share == doctest::Approx(0.6));
  CHECK(cfg.covisit_threshold == doctest::Approx(0.10));
  CHECK(cfg.distance_floor_km == doctest::Approx(0.5));
  CHECK(cfg.quantiles == 5);
  CHECK(cfg.timezone.seconds == -4 * 3600);
  CHECK(cfg.days_in_period() == 28);
  CHECK(cfg.require_seed() == 9);
  CHECK(cfg.events_path == tmp.str("ev.csv"));  // resolved against the config dir

  config::PipelineConfig bad = cfg;
  bad.day_coverage = 1.5;
  CHECK_THROWS_AS(bad.validate(), config::ConfigError);
  bad = cfg;
  bad.window_end = {2016, 7, 1};
  CHECK_THROWS_AS(bad.validate(), config::ConfigError);
  bad = cfg;
  bad.seed.reset();
  CHECK_THROWS_AS(bad.require_seed(), config::ConfigError);
}

TEST_CASE("invalid timezone in config is a validation error") {
  testsupport::TmpDir tmp("cfgtz");
  {
    auto f = csv::open_output(tmp.str("pipeline.toml"));
    f << "timezone = \"Mars/Olympus\"\n";
  }
  CHECK_THROWS_AS(config::PipelineConfig::from_file(tmp.str("pipeline.toml")),
                  config::ConfigError);
}
