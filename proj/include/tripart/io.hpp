#pragma once

#include <string>

namespace tripart {

std::string read_text_file(const std::string& path);

/// Write through a temporary sibling and rename over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

/// Shortest round-trip decimal for a double (`%.17g`).
std::string format_double(double x);

/// Strict full-string parse; throws SchemaError naming `what` on failure.
double parse_double(const std::string& text, const std::string& what);

}  // namespace tripart
