#include "urbanflow/csv.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace urbanflow::csv {

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string escape_field(std::string_view field) {
  bool needs_quotes = false;
  for (char c : field) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      needs_quotes = true;
      break;
    }
  }
  if (!field.empty() && (field.front() == ' ' || field.back() == ' ')) needs_quotes = true;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape_field(fields[i]);
  }
  return out;
}

Reader::Reader(std::istream& in, std::string source_name)
    : in_(in), source_(std::move(source_name)) {
  if (!in_.good()) throw std::runtime_error("unreadable stream: " + source_);
  std::string line;
  if (!std::getline(in_, line))
    throw std::runtime_error("empty input, expected a header row: " + source_);
  ++line_number_;
  header_ = split_line(line);
  for (std::size_t i = 0; i < header_.size(); ++i) index_[header_[i]] = i;
}

std::size_t Reader::column(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::runtime_error(source_ + ": missing required column '" + name + "'");
  return it->second;
}

bool Reader::has_column(const std::string& name) const { return index_.count(name) > 0; }

bool Reader::next(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_number_;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    fields = split_line(line);
    return true;
  }
  return false;
}

void Writer::row(const std::vector<std::string>& fields) {
  out_ << join_row(fields) << '\n';
}

std::ifstream open_input(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open input file: " + path);
  return f;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open output file: " + path);
  return f;
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  return std::string(buf, p);
}

}  // namespace urbanflow::csv
