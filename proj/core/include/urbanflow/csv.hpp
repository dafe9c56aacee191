#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace urbanflow::csv {

/// Split one CSV line into fields. Handles double-quoted fields with ""
/// escapes; embedded newlines are not supported (one record per line).
std::vector<std::string> split_line(std::string_view line);

/// Quote a field if it contains a comma, quote, or leading/trailing space.
std::string escape_field(std::string_view field);

std::string join_row(const std::vector<std::string>& fields);

/// Header-aware reader over a delimiter-separated stream.
class Reader {
 public:
  /// Reads the header row immediately; throws std::runtime_error if the
  /// stream is empty or unreadable.
  explicit Reader(std::istream& in, std::string source_name = "<stream>");

  const std::vector<std::string>& header() const { return header_; }

  /// Column index lookup; throws if the column is missing.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  /// Reads the next data row. Returns false at end of stream. Skips blank
  /// lines. `line_number()` reports the 1-based physical line of the row
  /// just read.
  bool next(std::vector<std::string>& fields);

  std::size_t line_number() const { return line_number_; }
  const std::string& source_name() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> index_;
  std::size_t line_number_ = 0;
};

/// Line-buffered CSV writer.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

/// Open a file for reading, throwing with the path in the message.
std::ifstream open_input(const std::string& path);
std::ofstream open_output(const std::string& path);

/// Format a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace urbanflow::csv
