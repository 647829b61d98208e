#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sigvae {

/// Shortest-safe round-trip formatting ("%.17g"), stable across runs.
std::string format_double(double v);

/// Writes text, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, used for config fingerprints.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace sigvae
