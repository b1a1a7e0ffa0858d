#include "dc/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "dc/error.hpp"

namespace dc::io {
namespace {

template <typename T>
void write_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("unexpected end of file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

void write_f32(std::ostream& out, float f) { write_le(out, std::bit_cast<std::uint32_t>(f)); }
float read_f32(std::istream& in) { return std::bit_cast<float>(read_le<std::uint32_t>(in)); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void expect_eof(std::istream& in, std::string_view what) {
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError(std::string(what) + ": trailing bytes after payload");
}

template <typename Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_u16(std::ostream& out, std::uint16_t v) { write_le(out, v); }
void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
std::uint16_t read_u16(std::istream& in) { return read_le<std::uint16_t>(in); }
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }

void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  out.put('\0');
}

void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size() + 1, '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in || got.compare(0, magic.size(), magic) != 0 || got.back() != '\0')
    throw DataError("bad magic, expected " + std::string(magic));
}

void write_fmat(std::ostream& out, const Matrix& m) {
  write_magic(out, "FMAT1");
  write_u64(out, m.rows());
  write_u64(out, m.cols());
  for (double v : m.values()) write_f32(out, static_cast<float>(v));
}

Matrix read_fmat(std::istream& in) {
  expect_magic(in, "FMAT1");
  const std::uint64_t rows = read_u64(in);
  const std::uint64_t cols = read_u64(in);
  if (cols != 0 && rows > std::numeric_limits<std::uint32_t>::max() / cols)
    throw DataError("FMAT1 header claims an implausible size");
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = read_f32(in);
  return Matrix(rows, cols, std::move(data));
}

void write_fmat(const std::filesystem::path& path, const Matrix& m) {
  auto out = open_out(path);
  write_fmat(out, m);
  finish_write(out, path);
}

Matrix read_fmat(const std::filesystem::path& path) {
  return with_path(path, [&] {
    auto in = open_in(path);
    Matrix m = read_fmat(in);
    expect_eof(in, "FMAT1");
    return m;
  });
}

void write_ivec(std::ostream& out, const std::vector<std::int64_t>& v) {
  write_magic(out, "IVEC1");
  write_u64(out, v.size());
  for (auto x : v) write_le(out, static_cast<std::uint64_t>(x));
}

std::vector<std::int64_t> read_ivec(std::istream& in) {
  expect_magic(in, "IVEC1");
  const std::uint64_t n = read_u64(in);
  if (n > std::numeric_limits<std::uint32_t>::max())
    throw DataError("IVEC1 header claims an implausible size");
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = static_cast<std::int64_t>(read_u64(in));
  return v;
}

void write_ivec(const std::filesystem::path& path, const std::vector<std::int64_t>& v) {
  auto out = open_out(path);
  write_ivec(out, v);
  finish_write(out, path);
}

std::vector<std::int64_t> read_ivec(const std::filesystem::path& path) {
  return with_path(path, [&] {
    auto in = open_in(path);
    auto v = read_ivec(in);
    expect_eof(in, "IVEC1");
    return v;
  });
}

void write_labels(const std::filesystem::path& path, const std::vector<std::size_t>& labels) {
  write_ivec(path, std::vector<std::int64_t>(labels.begin(), labels.end()));
}

std::vector<std::size_t> read_labels(const std::filesystem::path& path) {
  const auto raw = read_ivec(path);
  std::vector<std::size_t> out;
  out.reserve(raw.size());
  for (auto x : raw) {
    if (x < 0) throw DataError(path.string() + ": negative label " + std::to_string(x));
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

void write_images(std::ostream& out, const std::vector<Image>& images) {
  write_magic(out, "IMG1");
  write_u64(out, images.size());
  for (const auto& img : images) {
    for (std::size_t dim : {img.channels, img.height, img.width}) {
      if (dim > std::numeric_limits<std::uint16_t>::max())
        throw DataError("IMG1: image dimension " + std::to_string(dim) + " exceeds u16");
      write_u16(out, static_cast<std::uint16_t>(dim));
    }
    for (float p : img.pixels) write_f32(out, p);
  }
}

std::vector<Image> read_images(std::istream& in) {
  expect_magic(in, "IMG1");
  const std::uint64_t count = read_u64(in);
  std::vector<Image> images;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t c = read_u16(in);
    const std::size_t h = read_u16(in);
    const std::size_t w = read_u16(in);
    Image img(c, h, w);
    for (auto& p : img.pixels) p = read_f32(in);
    images.push_back(std::move(img));
  }
  return images;
}

void write_images(const std::filesystem::path& path, const std::vector<Image>& images) {
  auto out = open_out(path);
  write_images(out, images);
  finish_write(out, path);
}

std::vector<Image> read_images(const std::filesystem::path& path) {
  return with_path(path, [&] {
    auto in = open_in(path);
    auto images = read_images(in);
    expect_eof(in, "IMG1");
    return images;
  });
}

}  // namespace dc::io
