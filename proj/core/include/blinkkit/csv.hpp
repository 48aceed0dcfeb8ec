#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace blinkkit::csv {

/// Minimal reader for the unquoted, comma-separated, LF-terminated files the
/// pipeline exchanges. Fields may not contain commas or newlines.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based line number in the source file for each row (for messages).
  std::vector<std::size_t> line_numbers;

  /// Column index by name; throws MalformedCsv when missing.
  std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::string_view text, const std::string& source_name = "<memory>");

/// Throws MalformedCsv unless `table.header` equals `expected` exactly.
void require_header(const Table& table, const std::vector<std::string>& expected,
                    const std::string& source_name);

double to_double(std::string_view field, const std::string& what);
long long to_int(std::string_view field, const std::string& what);

/// Shortest round-trip decimal form.
std::string format_double(double value);

std::string join(const std::vector<std::string>& fields);

}  // namespace blinkkit::csv
