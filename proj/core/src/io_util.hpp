#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace iclab::detail {

// Writes to a sibling temp file and renames it over `path`, so readers see
// either the old or the new content. Throws IoError naming the path.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace iclab::detail
