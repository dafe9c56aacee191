#include "urbanflow/jsonlog.hpp"

#include <cstdint>
#include <cstdio>
#include <string>

#include "urbanflow/csv.hpp"

namespace urbanflow::jsonlog {

namespace {

std::string json_escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out += '"';
  return out;
}

}  // namespace

Line::Line(std::string level, std::string msg) {
  fields_.emplace_back("level", json_escape(level));
  fields_.emplace_back("msg", json_escape(msg));
}

Line& Line::field(const std::string& key, const std::string& value) {
  fields_.emplace_back(key, json_escape(value));
  return *this;
}
Line& Line::field(const std::string& key, const char* value) {
  return field(key, std::string(value));
}
Line& Line::field(const std::string& key, double value) {
  fields_.emplace_back(key, csv::format_double(value));
  return *this;
}
Line& Line::field(const std::string& key, std::int64_t value) {
  fields_.emplace_back(key, std::to_string(value));
  return *this;
}
Line& Line::field(const std::string& key, std::uint64_t value) {
  fields_.emplace_back(key, std::to_string(value));
  return *this;
}
Line& Line::field(const std::string& key, int value) {
  fields_.emplace_back(key, std::to_string(value));
  return *this;
}
Line& Line::field(const std::string& key, bool value) {
  fields_.emplace_back(key, value ? "true" : "false");
  return *this;
}

Line::~Line() {
  std::string out = "{";
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (i) out += ",";
    out += json_escape(fields_[i].first);
    out += ":";
    out += fields_[i].second;
  }
  out += "}\n";
  std::fputs(out.c_str(), stderr);
}

}  // namespace urbanflow::jsonlog
