#pragma once

#include <filesystem>
#include <string>

namespace gsg {

// Whole-file reads and writes; throw IoError naming the path.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gsg
