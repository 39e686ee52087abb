#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace ambisql::util {

std::string sha256_hex(std::string_view data);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string> split_lines(std::string_view text);

std::string read_file(const std::string& path);

// Writes via a temp file in the same directory followed by rename, so an
// interrupted run never leaves a truncated file at `path`.
void atomic_write_file(const std::string& path, std::string_view content);

std::string now_iso8601();

// Runs fn(0..n-1) across up to `width` threads. width <= 1 runs inline.
// Exceptions from fn propagate (first one wins).
void parallel_for(std::size_t n, int width, const std::function<void(std::size_t)>& fn);

}  // namespace ambisql::util
