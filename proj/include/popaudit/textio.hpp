#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace popaudit::textio {

// Shortest decimal form that parses back to exactly the same double.
// Locale independent, so written files are byte-identical everywhere.
std::string format_double(double value);

// Strict full-token parse; rejects trailing junk, leading whitespace,
// hex floats and locale decimal commas.
std::optional<double> parse_double(std::string_view token);

std::optional<std::int64_t> parse_int(std::string_view token);

std::vector<std::string_view> split(std::string_view line, char sep);

// RFC 4180 field quoting: quotes only when the field contains a comma,
// a quote or a line break.
std::string csv_field(std::string_view field);

std::uint64_t fnv1a64(std::string_view data);

std::string to_hex(std::uint64_t value);

} // namespace popaudit::textio
