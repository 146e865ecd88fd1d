#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace hncf::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the row starts
};

// RFC-4180: comma separated, fields optionally double-quoted, "" escapes a
// quote inside a quoted field, quoted fields may span lines. Throws
// MalformedRow on an unterminated quote.
std::vector<Row> read(std::istream& in);

// Quotes the field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

}  // namespace hncf::csv
