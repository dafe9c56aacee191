#include "urbanflow/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

#include "urbanflow/csv.hpp"

namespace urbanflow::config {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Strip a trailing comment, respecting double-quoted strings.
std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw ConfigError(source + ":" + std::to_string(line) + ": " + msg);
}

Toml::Value parse_scalar(const std::string& raw, const std::string& source, std::size_t line) {
  Toml::Value v{};
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    v.kind = Toml::Value::Kind::string;
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        ++i;
        switch (raw[i]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: fail(source, line, "unsupported escape in string");
        }
      } else {
        out.push_back(raw[i]);
      }
    }
    v.s = std::move(out);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = Toml::Value::Kind::boolean;
    v.b = raw == "true";
    return v;
  }
  {
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), i);
    if (ec == std::errc() && p == raw.data() + raw.size()) {
      v.kind = Toml::Value::Kind::integer;
      v.i = i;
      v.d = double(i);
      return v;
    }
  }
  {
    double d = 0;
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), d);
    if (ec == std::errc() && p == raw.data() + raw.size()) {
      v.kind = Toml::Value::Kind::floating;
      v.d = d;
      return v;
    }
  }
  fail(source, line, "cannot parse value: " + raw);
}

std::vector<std::string> split_array_items(const std::string& body, const std::string& source,
                                           std::size_t line) {
  std::vector<std::string> items;
  std::string cur;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  const std::string last = trim(cur);
  if (!last.empty()) items.push_back(last);
  if (in_string) fail(source, line, "unterminated string in array");
  return items;
}

}  // namespace

Toml Toml::parse(std::istream& in, const std::string& source) {
  Toml toml;
  toml.source_ = source;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(source, lineno, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) fail(source, lineno, "empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(source, lineno, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string raw = trim(s.substr(eq + 1));
    if (key.empty()) fail(source, lineno, "empty key");
    if (raw.empty()) fail(source, lineno, "empty value for key " + key);

    Value v{};
    if (raw.front() == '[') {
      if (raw.back() != ']') fail(source, lineno, "unterminated array");
      v.kind = Value::Kind::array;
      for (const auto& item : split_array_items(raw.substr(1, raw.size() - 2), source, lineno))
        v.items.push_back(parse_scalar(item, source, lineno));
    } else {
      v = parse_scalar(raw, source, lineno);
    }
    const std::string full_key = section.empty() ? key : section + "." + key;
    if (toml.values_.count(full_key)) fail(source, lineno, "duplicate key " + full_key);
    toml.values_[full_key] = std::move(v);
  }
  return toml;
}

Toml Toml::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  return parse(f, path);
}

std::vector<std::string> Toml::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

const Toml::Value& Toml::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(source_ + ": missing key '" + key + "'");
  return it->second;
}

std::string Toml::get_string(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::string)
    throw ConfigError(source_ + ": key '" + key + "' is not a string");
  return v.s;
}

std::int64_t Toml::get_int(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::integer)
    throw ConfigError(source_ + ": key '" + key + "' is not an integer");
  return v.i;
}

double Toml::get_double(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::floating && v.kind != Value::Kind::integer)
    throw ConfigError(source_ + ": key '" + key + "' is not a number");
  return v.d;
}

bool Toml::get_bool(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::boolean)
    throw ConfigError(source_ + ": key '" + key + "' is not a boolean");
  return v.b;
}

std::vector<std::string> Toml::get_string_array(const std::string& key) const {
  const Value& v = at(key);
  if (v.kind != Value::Kind::array)
    throw ConfigError(source_ + ": key '" + key + "' is not an array");
  std::vector<std::string> out;
  for (const auto& item : v.items) {
    if (item.kind != Value::Kind::string)
      throw ConfigError(source_ + ": array '" + key + "' holds a non-string item");
    out.push_back(item.s);
  }
  return out;
}

std::string Toml::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}
std::int64_t Toml::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}
double Toml::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}
bool Toml::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  const Toml toml = Toml::parse_file(path);
  return from_toml(toml, std::filesystem::path(path).parent_path().string());
}

PipelineConfig PipelineConfig::from_toml(const Toml& toml, const std::string& base_dir) {
  PipelineConfig c;
  c.events_path = resolve(base_dir, toml.get_string("inputs.events", ""));
  c.antennas_path = resolve(base_dir, toml.get_string("inputs.antennas", ""));
  c.malls_path = resolve(base_dir, toml.get_string("inputs.malls", ""));
  c.comunas_path = resolve(base_dir, toml.get_string("inputs.comunas", ""));
  c.hdi_path = resolve(base_dir, toml.get_string("inputs.hdi", ""));
  c.census_path = resolve(base_dir, toml.get_string("inputs.census", ""));
  c.scenario_path = resolve(base_dir, toml.get_string("inputs.scenario", ""));

  const std::string tz = toml.get_string("timezone", "-04:00");
  auto offset = timeutil::UtcOffset::parse(tz);
  if (!offset) throw ConfigError("invalid timezone string: '" + tz + "'");
  c.timezone = *offset;

  const std::string start = toml.get_string("window.start", "2016-08-01");
  const std::string end = toml.get_string("window.end", "2016-08-28");
  auto ds = timeutil::parse_date(start);
  auto de = timeutil::parse_date(end);
  if (!ds) throw ConfigError("invalid window.start date: '" + start + "'");
  if (!de) throw ConfigError("invalid window.end date: '" + end + "'");
  c.window_start = *ds;
  c.window_end = *de;

  c.visitor_max_presences = static_cast<std::size_t>(
      toml.get_int("thresholds.visitor_max_presences", 10));
  c.day_coverage = toml.get_double("thresholds.day_coverage", 0.8);
  c.tower_share = toml.get_double("thresholds.tower_share", 0.6);
  c.covisit_threshold = toml.get_double("thresholds.covisit_threshold", 0.10);
  c.distance_floor_km = toml.get_double("thresholds.distance_floor_km", 0.5);
  c.quantiles = static_cast<int>(toml.get_int("thresholds.quantiles", 5));

  c.bootstrap_resamples = static_cast<int>(toml.get_int("bootstrap.resamples", 1000));
  if (toml.has("seed")) c.seed = static_cast<std::uint64_t>(toml.get_int("seed"));

  const std::string transform = toml.get_string("models.attraction_transform", "linear");
  if (transform == "linear")
    c.attraction_transform = gravity::AttractionTransform::linear;
  else if (transform == "paper-log")
    c.attraction_transform = gravity::AttractionTransform::paper_log;
  else
    throw ConfigError("models.attraction_transform must be 'linear' or 'paper-log'");

  const std::string sim = toml.get_string("models.similarity_mode", "similarity");
  if (sim == "similarity")
    c.similarity_mode = covisit::SimilarityMode::similarity;
  else if (sim == "distance")
    c.similarity_mode = covisit::SimilarityMode::distance;
  else
    throw ConfigError("models.similarity_mode must be 'similarity' or 'distance'");

  const std::string pairs = toml.get_string("models.covisit_pairs", "all");
  if (pairs == "all")
    c.covisit_pairs = covisit::PairSelection::all;
  else if (pairs == "thresholded")
    c.covisit_pairs = covisit::PairSelection::thresholded;
  else
    throw ConfigError("models.covisit_pairs must be 'all' or 'thresholded'");

  c.cluster_count = static_cast<int>(toml.get_int("models.clusters", 3));
  if (toml.has("mall_keywords")) c.mall_keywords = toml.get_string_array("mall_keywords");
  c.output_dir = resolve(base_dir, toml.get_string("output_dir", "out"));
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(day_coverage)) throw ConfigError("thresholds.day_coverage must lie in [0,1]");
  if (!in_unit(tower_share)) throw ConfigError("thresholds.tower_share must lie in [0,1]");
  if (covisit_threshold < 0.0 || covisit_threshold > 1.0)
    throw ConfigError("thresholds.covisit_threshold must lie in [0,1]");
  if (distance_floor_km <= 0.0)
    throw ConfigError("thresholds.distance_floor_km must be positive");
  if (quantiles < 2) throw ConfigError("thresholds.quantiles must be >= 2");
  if (bootstrap_resamples < 100) throw ConfigError("bootstrap.resamples must be >= 100");
  if (cluster_count < 1) throw ConfigError("models.clusters must be >= 1");
  if (timeutil::days_from_civil(window_end) < timeutil::days_from_civil(window_start))
    throw ConfigError("analysis window is empty (end before start)");
}

int PipelineConfig::days_in_period() const {
  return static_cast<int>(timeutil::days_from_civil(window_end) -
                          timeutil::days_from_civil(window_start)) +
         1;
}

std::uint64_t PipelineConfig::require_seed() const {
  if (!seed)
    throw ConfigError(
        "this stage is randomized and requires an explicit 'seed' in the config "
        "(wall-clock seeding is not supported)");
  return *seed;
}

}  // namespace urbanflow::config
