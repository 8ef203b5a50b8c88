#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pwi {

/// Canonical form used for every label/word equality test: ASCII lowercase,
/// trimmed, internal whitespace runs collapsed to one space.
std::string normalize_label(std::string_view s);

/// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

std::string trim(std::string_view s);

}  // namespace pwi
