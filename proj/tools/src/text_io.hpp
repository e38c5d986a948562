#pragma once

// Small helpers for deterministic text output.

#include <filesystem>
#include <string>
#include <string_view>

namespace snapdm::cli {

// Shortest decimal form that parses back to the same double.
std::string format_number(double value);

// Writes `content` to `path` in binary mode; throws Error(Io) on failure.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace snapdm::cli
