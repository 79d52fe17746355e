#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmagent {

// SHA-256 of a byte buffer, lowercase hex.
std::string sha256_hex(const void* data, size_t size);
std::string sha256_hex(std::string_view data);
std::string sha256_hex(const std::vector<uint8_t>& data);

// First 16 hex chars of sha256 — used to key fixture files by URL/query.
std::string short_hash(std::string_view text);

std::string base64_encode(const void* data, size_t size);

std::string trim(std::string_view s);
// Trim plus collapse internal whitespace runs to single spaces.
std::string collapse_ws(std::string_view s);
std::string to_lower(std::string_view s);

// Truncate to at most max_bytes without splitting a UTF-8 sequence.
std::string utf8_truncate(std::string_view s, size_t max_bytes);

// Replace newlines/tabs with spaces so a value stays on one rendered line.
std::string single_line(std::string_view s);

// Shell-style glob with '*' and '?'.
bool glob_match(std::string_view pattern, std::string_view text);

std::vector<std::string> split(std::string_view s, char sep);

bool starts_with(std::string_view s, std::string_view prefix);

std::string read_text_file(const std::filesystem::path& path);
std::vector<uint8_t> read_binary_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);
void write_binary_file(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);
void append_line(const std::filesystem::path& path, std::string_view line);

std::optional<std::string> env_var(const char* name);

bool looks_like_url(std::string_view s);

} // namespace mmagent
