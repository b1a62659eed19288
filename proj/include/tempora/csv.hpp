#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tempora {

/// RFC 4180 output: CRLF line ends, fields quoted only when they contain a
/// comma, quote, CR or LF. Numbers use the shortest round-trip form.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);

  /// Throws InputError when the field count differs from the header.
  void row(const std::vector<std::string>& fields);

  static std::string escape(std::string_view field);
  static std::string number(double value);
  static std::string number(std::optional<double> value);

 private:
  void write(const std::vector<std::string>& fields);

  std::ostream* out_;
  std::size_t columns_;
};

}  // namespace tempora
