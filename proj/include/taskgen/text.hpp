#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "taskgen/domain.hpp"

namespace taskgen::text {

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Truncates to at most `max_chars` UTF-8 code points without splitting a
/// multi-byte sequence.
std::string utf8_truncate(std::string_view s, std::size_t max_chars);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);
bool starts_with(std::string_view s, std::string_view prefix);

/// Lowercase, every non-alphanumeric byte becomes a space, runs collapsed.
std::string fold(std::string_view s);

std::string sha256_hex(std::string_view data);

std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(const std::string& s);

std::string read_file(const std::string& path);
/// Write to a sibling temp file, fsync, then rename over `path`.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace taskgen::text
