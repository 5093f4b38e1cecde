#pragma once

// ALF1 dense array container and its on-disk codec.
//
// Layout (all integers little-endian u32):
//   0..3   magic "ALF1"
//   4..7   format version (1)
//   8..11  height
//   12..15 width
//   16..19 channels
//   20..23 dtype (0 = F32, 1 = U32)
//   24..   height*width*channels values, row-major, channel-last,
//          little-endian (IEEE-754 binary32 for F32)

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "alctl/errors.hpp"

namespace alctl {

enum class DType : std::uint32_t { f32 = 0, u32 = 1 };

inline const char* dtype_name(DType d) { return d == DType::f32 ? "F32" : "U32"; }

class ArrayContainer {
 public:
  ArrayContainer() = default;

  static ArrayContainer make_f32(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
                                 std::vector<float> data = {}) {
    ArrayContainer a(height, width, channels);
    if (data.empty()) data.assign(a.size(), 0.0f);
    a.data_ = std::move(data);
    a.check_length();
    return a;
  }

  static ArrayContainer make_u32(std::uint32_t height, std::uint32_t width, std::uint32_t channels,
                                 std::vector<std::uint32_t> data = {}) {
    ArrayContainer a(height, width, channels);
    if (data.empty()) data.assign(a.size(), 0u);
    a.data_ = std::move(data);
    a.check_length();
    return a;
  }

  std::uint32_t height() const noexcept { return height_; }
  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t channels() const noexcept { return channels_; }
  DType dtype() const noexcept { return std::holds_alternative<std::vector<float>>(data_) ? DType::f32 : DType::u32; }
  std::size_t size() const noexcept {
    return std::size_t{height_} * std::size_t{width_} * std::size_t{channels_};
  }
  std::size_t pixels() const noexcept { return std::size_t{height_} * std::size_t{width_}; }

  std::span<const float> f32() const { return std::get<std::vector<float>>(checked(DType::f32)); }
  std::span<float> f32() { return std::get<std::vector<float>>(checked(DType::f32)); }
  std::span<const std::uint32_t> u32() const { return std::get<std::vector<std::uint32_t>>(checked(DType::u32)); }
  std::span<std::uint32_t> u32() { return std::get<std::vector<std::uint32_t>>(checked(DType::u32)); }

  std::size_t index(std::size_t row, std::size_t col, std::size_t ch = 0) const noexcept {
    return (row * width_ + col) * channels_ + ch;
  }

  // Bit-exact equality: F32 payloads compare by representation, so NaN == NaN
  // and +0 != -0.
  friend bool operator==(const ArrayContainer& a, const ArrayContainer& b) {
    if (a.height_ != b.height_ || a.width_ != b.width_ || a.channels_ != b.channels_ || a.dtype() != b.dtype())
      return false;
    return std::visit(
        [&](const auto& lhs) {
          using V = std::decay_t<decltype(lhs)>;
          const auto& rhs = std::get<V>(b.data_);
          return lhs.empty() || std::memcmp(lhs.data(), rhs.data(), lhs.size() * 4) == 0;
        },
        a.data_);
  }

 private:
  ArrayContainer(std::uint32_t h, std::uint32_t w, std::uint32_t c) : height_(h), width_(w), channels_(c) {
    if (h == 0) throw validation_error("array height must be positive");
    if (w == 0) throw validation_error("array width must be positive");
    if (c == 0) throw validation_error("array channels must be positive");
  }

  void check_length() const {
    const std::size_t n = std::visit([](const auto& v) { return v.size(); }, data_);
    if (n != size())
      throw validation_error("array data length " + std::to_string(n) + " does not match " + std::to_string(height_) +
                             "x" + std::to_string(width_) + "x" + std::to_string(channels_));
  }

  using Storage = std::variant<std::vector<float>, std::vector<std::uint32_t>>;

  const Storage& checked(DType want) const {
    if (dtype() != want)
      throw validation_error(std::string("array dtype is ") + dtype_name(dtype()) + ", expected " + dtype_name(want));
    return data_;
  }
  Storage& checked(DType want) {
    if (dtype() != want)
      throw validation_error(std::string("array dtype is ") + dtype_name(dtype()) + ", expected " + dtype_name(want));
    return data_;
  }

  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::uint32_t channels_ = 0;
  Storage data_;
};

namespace detail {

inline constexpr std::array<char, 4> kMagic{'A', 'L', 'F', '1'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 24;

inline void put_u32(unsigned char* out, std::uint32_t v) {
  out[0] = static_cast<unsigned char>(v);
  out[1] = static_cast<unsigned char>(v >> 8);
  out[2] = static_cast<unsigned char>(v >> 16);
  out[3] = static_cast<unsigned char>(v >> 24);
}

inline std::uint32_t get_u32(const unsigned char* in) {
  return std::uint32_t{in[0]} | (std::uint32_t{in[1]} << 8) | (std::uint32_t{in[2]} << 16) |
         (std::uint32_t{in[3]} << 24);
}

template <typename T>
std::uint32_t raw_bits(T v) {
  if constexpr (std::is_same_v<T, float>)
    return std::bit_cast<std::uint32_t>(v);
  else
    return v;
}

}  // namespace detail

inline void store_array(const ArrayContainer& array, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw storage_error("cannot open " + path.string() + " for writing");

  std::array<unsigned char, detail::kHeaderBytes> header{};
  std::memcpy(header.data(), detail::kMagic.data(), 4);
  detail::put_u32(header.data() + 4, detail::kFormatVersion);
  detail::put_u32(header.data() + 8, array.height());
  detail::put_u32(header.data() + 12, array.width());
  detail::put_u32(header.data() + 16, array.channels());
  detail::put_u32(header.data() + 20, static_cast<std::uint32_t>(array.dtype()));
  out.write(reinterpret_cast<const char*>(header.data()), header.size());

  auto write_values = [&](auto values) {
    constexpr std::size_t kChunk = 1 << 14;
    std::vector<unsigned char> buf;
    buf.reserve(kChunk * 4);
    for (std::size_t i = 0; i < values.size(); i += kChunk) {
      const std::size_t n = std::min(kChunk, values.size() - i);
      buf.resize(n * 4);
      for (std::size_t j = 0; j < n; ++j) detail::put_u32(buf.data() + 4 * j, detail::raw_bits(values[i + j]));
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
  };
  if (array.dtype() == DType::f32)
    write_values(array.f32());
  else
    write_values(array.u32());

  out.flush();
  if (!out) throw storage_error("write failed for " + path.string());
}

inline ArrayContainer load_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw storage_error("cannot open " + path.string() + " for reading");
  const std::string ctx = path.string() + ": ";

  std::array<unsigned char, detail::kHeaderBytes> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size())) throw format_error(ctx + "truncated header");
  if (std::memcmp(header.data(), detail::kMagic.data(), 4) != 0) throw format_error(ctx + "bad magic");

  const std::uint32_t version = detail::get_u32(header.data() + 4);
  const std::uint32_t height = detail::get_u32(header.data() + 8);
  const std::uint32_t width = detail::get_u32(header.data() + 12);
  const std::uint32_t channels = detail::get_u32(header.data() + 16);
  const std::uint32_t dtype = detail::get_u32(header.data() + 20);
  if (version != detail::kFormatVersion) throw format_error(ctx + "unsupported version " + std::to_string(version));
  if (height == 0) throw format_error(ctx + "height is zero");
  if (width == 0) throw format_error(ctx + "width is zero");
  if (channels == 0) throw format_error(ctx + "channels is zero");
  if (dtype > 1) throw format_error(ctx + "dtype tag " + std::to_string(dtype) + " is not 0 (F32) or 1 (U32)");

  const std::size_t count = std::size_t{height} * width * channels;
  if (count > std::numeric_limits<std::size_t>::max() / 4) throw format_error(ctx + "dims overflow");

  std::vector<unsigned char> payload(count * 4);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != payload.size())
    throw format_error(ctx + "truncated payload: expected " + std::to_string(payload.size()) + " bytes, found " +
                       std::to_string(got));
  if (in.peek() != std::char_traits<char>::eof()) throw format_error(ctx + "trailing bytes after payload");

  if (dtype == 0) {
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = std::bit_cast<float>(detail::get_u32(payload.data() + 4 * i));
    return ArrayContainer::make_f32(height, width, channels, std::move(data));
  }
  std::vector<std::uint32_t> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = detail::get_u32(payload.data() + 4 * i);
  return ArrayContainer::make_u32(height, width, channels, std::move(data));
}

}  // namespace alctl
