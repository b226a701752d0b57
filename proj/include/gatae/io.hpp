#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gatae::io {

using Bytes = std::vector<std::uint8_t>;

void put_u32_le(Bytes& out, std::uint32_t v);
void put_f32_le(Bytes& out, float v);
void put_f64_le(Bytes& out, double v);
void put_string(Bytes& out, std::string_view s);

std::uint32_t get_u32_le(const std::uint8_t* p);
float get_f32_le(const std::uint8_t* p);
double get_f64_le(const std::uint8_t* p);

Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames over `path`.
void atomic_write(const std::filesystem::path& path, const Bytes& bytes);
void atomic_write(const std::filesystem::path& path, std::string_view text);

// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::uint8_t* data, std::size_t len,
                    std::uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);

}  // namespace gatae::io
