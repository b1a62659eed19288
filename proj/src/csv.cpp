#include "tempora/csv.hpp"

#include <ostream>

#include <fmt/format.h>

#include "tempora/errors.hpp"

namespace tempora {

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(&out), columns_(header.size()) {
  write(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) {
    throw InputError("csv row has " + std::to_string(fields.size()) + " fields, header has " +
                     std::to_string(columns_));
  }
  write(fields);
}

void CsvWriter::write(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) *out_ << ',';
    *out_ << escape(fields[i]);
  }
  *out_ << "\r\n";
}

std::string CsvWriter::escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string CsvWriter::number(double value) { return fmt::format("{}", value); }

std::string CsvWriter::number(std::optional<double> value) { return value ? number(*value) : std::string(); }

}  // namespace tempora
