#pragma once

#include "confsel/dataset.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace confsel::io {

/// Comma-separated text with a header row. Double-quoted fields are
/// accepted; embedded newlines are not.
RawTable parse_csv(std::string_view text);
RawTable read_csv(const std::filesystem::path& path);

/// `key = value` lines; `#` starts a comment. Order is preserved and
/// duplicate keys are rejected.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

/// Sidecar roles: continuous | ordered:c | unordered:c | treatment | outcome
/// | potential0 | potential1 | ignore.
Schema parse_schema(std::string_view text);
Schema read_schema(const std::filesystem::path& path);

std::string dataset_csv(const Dataset& ds);
std::string dataset_schema(const Dataset& ds);

/// Reads the whole file; throws ValidationError if it cannot be opened.
std::string read_text(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Writes through a sibling temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace confsel::io
