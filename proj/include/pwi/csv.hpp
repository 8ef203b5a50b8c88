#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pwi::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: comma separated, double-quoted fields may contain commas,
/// newlines and doubled quotes. Lines starting with '#' outside a quoted field
/// are treated as comments when skip_comments is set. Blank lines are dropped.
std::vector<Row> parse(std::string_view text, bool skip_comments = true);

/// Quotes a field only when it needs it.
std::string escape(std::string_view field);

std::string format_row(const Row& row);

}  // namespace pwi::csv
