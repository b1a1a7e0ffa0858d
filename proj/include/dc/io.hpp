#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "dc/image.hpp"
#include "dc/matrix.hpp"

namespace dc::io {

// FMAT1: "FMAT1\0", rows (u64 LE), cols (u64 LE), rows*cols f32 LE row-major.
// Values are stored as f32, so doubles not representable in f32 are rounded.
void write_fmat(std::ostream& out, const Matrix& m);
Matrix read_fmat(std::istream& in);
void write_fmat(const std::filesystem::path& path, const Matrix& m);
Matrix read_fmat(const std::filesystem::path& path);

// IVEC1: "IVEC1\0", count (u64 LE), count i64 LE entries.
void write_ivec(std::ostream& out, const std::vector<std::int64_t>& v);
std::vector<std::int64_t> read_ivec(std::istream& in);
void write_ivec(const std::filesystem::path& path, const std::vector<std::int64_t>& v);
std::vector<std::int64_t> read_ivec(const std::filesystem::path& path);

// Label helpers: IVEC1 stores signed entries, partitions use unsigned indices.
void write_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels);
std::vector<std::size_t> read_labels(const std::filesystem::path& path);

// IMG1: "IMG1\0", count (u64 LE), then per image channels/height/width (u16 LE)
// followed by the f32 LE pixels.
void write_images(std::ostream& out, const std::vector<Image>& images);
std::vector<Image> read_images(std::istream& in);
void write_images(const std::filesystem::path& path, const std::vector<Image>& images);
std::vector<Image> read_images(const std::filesystem::path& path);

// Little-endian primitives shared by the container formats.
void write_u16(std::ostream& out, std::uint16_t v);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
std::uint16_t read_u16(std::istream& in);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
void write_magic(std::ostream& out, std::string_view magic);
// Throws DataError if the next bytes are not `magic` followed by a NUL.
void expect_magic(std::istream& in, std::string_view magic);

}  // namespace dc::io
