#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace coverassert {

// Deterministic serialization: sorted keys, two-space indent, floats printed
// with 9 significant digits, trailing newline.
std::string canonical_dump(const nlohmann::json& value);

// Writes via a temporary file and rename so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace coverassert
