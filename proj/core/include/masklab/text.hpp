#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace masklab::text {

/// Lowercase, trim, collapse inner whitespace runs to single spaces.
std::string normalize(std::string_view s);

std::string trim(std::string_view s);

/// Split on whitespace runs; no empty parts.
std::vector<std::string> split_tokens(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep = " ");

}  // namespace masklab::text
