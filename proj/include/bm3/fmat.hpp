#pragma once

#include <filesystem>

#include "bm3/common.hpp"

namespace bm3::fmat {

// Layout: "FMAT" | u32 version=1 | u64 rows | u64 cols | rows*cols f32, all
// little-endian, row-major.
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

/// Writes values rounded to binary32.
void write(const std::filesystem::path& path, const Matrix& values);

/// Reads and validates the header; values are widened from binary32 exactly.
/// Non-finite entries are rejected with their (row, col).
Matrix read(const std::filesystem::path& path);

}  // namespace bm3::fmat
