#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace wot {

// %.17g, with "inf", "-inf", "nan" for non-finite values.
std::string format_double(double value);

// RFC 4180: quote when the field holds a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row(std::vector<std::string> cells);
  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  // CRLF line endings, as RFC 4180 specifies.
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Minimal RFC 4180 reader; returns rows including the header.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace wot
