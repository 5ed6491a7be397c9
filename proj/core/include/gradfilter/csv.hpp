#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace gradfilter {

/// Shortest stable text for a double: "%.12g", with "inf" / "-inf" / "nan".
std::string format_real(double v);

/// Writes a header row plus rows, comma separated, '\n' line endings.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Reads a CSV written by write_csv back as header + rows (no quoting).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace gradfilter
