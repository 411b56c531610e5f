#pragma once

#include <string>
#include <string_view>
#include <vector>

// RFC-4180 CSV. Reader accepts CRLF or LF; writer emits LF and quotes only
// fields containing a comma, quote, CR or LF.
namespace arched::csv {

using Row = std::vector<std::string>;

// Throws import-malformed on an unterminated quoted field. Blank lines are
// skipped; row numbering in errors counts records from 1 (the header).
std::vector<Row> parse(std::string_view text);

std::string escape_field(std::string_view field);
std::string format_row(const Row& row);

}  // namespace arched::csv
