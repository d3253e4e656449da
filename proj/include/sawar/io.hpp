#pragma once

#include <string>
#include <vector>

namespace sawar {

// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite values.
std::string format_double(double v);

// Parses what format_double writes.
double parse_double(const std::string& s);

std::string read_file(const std::string& path);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, const std::string& content);

std::vector<std::string> split_fields(const std::string& line, char sep = ',');

}  // namespace sawar
