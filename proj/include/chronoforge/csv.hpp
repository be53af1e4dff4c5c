#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace chronoforge::csv {

using Row = std::vector<std::string>;

/// RFC-4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF.
/// A UTF-8 byte order mark at the start is skipped. Throws ParseError on an
/// unterminated quoted field.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string format_field(std::string_view field);
std::string format_row(const Row& row);

}  // namespace chronoforge::csv
