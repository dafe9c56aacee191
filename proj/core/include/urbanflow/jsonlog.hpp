#pragma once

#include <string>
#include <utility>
#include <vector>

namespace urbanflow::jsonlog {

/// One line-delimited JSON record on stderr: {"level":...,"msg":...,...}.
/// Values are emitted as JSON strings or raw numbers.
class Line {
 public:
  explicit Line(std::string level, std::string msg);
  Line& field(const std::string& key, const std::string& value);
  Line& field(const std::string& key, const char* value);
  Line& field(const std::string& key, double value);
  Line& field(const std::string& key, std::int64_t value);
  Line& field(const std::string& key, std::uint64_t value);
  Line& field(const std::string& key, int value);
  Line& field(const std::string& key, bool value);
  ~Line();  // emits the record

  Line(const Line&) = delete;
  Line& operator=(const Line&) = delete;

 private:
  std::vector<std::pair<std::string, std::string>> fields_;
};

inline Line info(std::string msg) { return Line("info", std::move(msg)); }
inline Line warn(std::string msg) { return Line("warn", std::move(msg)); }
inline Line error(std::string msg) { return Line("error", std::move(msg)); }

}  // namespace urbanflow::jsonlog
