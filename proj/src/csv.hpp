#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mktsim::detail {

/// RFC 4180 field split for one line (quotes, doubled quotes). No embedded newlines.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view value);

/// Lines without trailing '\r'; a final empty line is dropped.
std::vector<std::string_view> split_lines(std::string_view text);

}  // namespace mktsim::detail
