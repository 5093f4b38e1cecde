#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "alctl/array_store.hpp"
#include "test_util.hpp"

using namespace alctl;
using testutil::TempDir;

TEST(ArrayStore, SingleValueByteLayout) {
  TempDir dir;
  const auto a = ArrayContainer::make_f32(1, 1, 1, {0.5f});
  store_array(a, dir / "one.alf");
  const std::string bytes = testutil::slurp(dir / "one.alf");
  // 24 header bytes + one binary32.
  ASSERT_EQ(bytes.size(), 28u);
  const std::string expected("ALF1\x01\0\0\0\x01\0\0\0\x01\0\0\0\x01\0\0\0\0\0\0\0\0\0\0\x3f", 28);
  EXPECT_EQ(bytes, expected);
  EXPECT_EQ(load_array(dir / "one.alf"), a);
}

TEST(ArrayStore, U32HeaderTagAndEndianness) {
  TempDir dir;
  const auto a = ArrayContainer::make_u32(1, 2, 1, {0x01020304u, 7u});
  store_array(a, dir / "u.alf");
  const std::string bytes = testutil::slurp(dir / "u.alf");
  ASSERT_EQ(bytes.size(), 32u);
  EXPECT_EQ(bytes[20], '\x01');
  EXPECT_EQ(bytes.substr(24, 4), std::string("\x04\x03\x02\x01", 4));
  EXPECT_EQ(load_array(dir / "u.alf"), a);
}

TEST(ArrayStore, ZeroTileRoundTrip) {
  TempDir dir;
  const auto a = ArrayContainer::make_f32(512, 512, 1);
  store_array(a, dir / "z.alf");
  const auto b = load_array(dir / "z.alf");
  EXPECT_EQ(b, a);
  for (float v : b.f32()) ASSERT_EQ(v, 0.0f);
}

TEST(ArrayStore, DecoderSizedMapRoundTripsBitExact) {
  TempDir dir;
  std::vector<float> v(128u * 128u * 128u);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i % 7);
  const auto a = ArrayContainer::make_f32(128, 128, 128, v);
  store_array(a, dir / "f.alf");
  EXPECT_EQ(load_array(dir / "f.alf"), a);
}

TEST(ArrayStore, RoundTripPreservesSpecialFloatBits) {
  TempDir dir;
  const float nan = std::nanf("0x123");
  const auto a = ArrayContainer::make_f32(2, 2, 1, {-0.0f, nan, INFINITY, 1e-42f});
  store_array(a, dir / "s.alf");
  EXPECT_EQ(load_array(dir / "s.alf"), a);
}

TEST(ArrayStore, RandomRoundTripProperty) {
  TempDir dir;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> dim(1, 9), raw;
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = dim(rng), w = dim(rng), c = dim(rng);
    std::vector<std::uint32_t> bits(std::size_t{h} * w * c);
    for (auto& b : bits) b = raw(rng);
    ArrayContainer a;
    if (trial % 2) {
      a = ArrayContainer::make_u32(h, w, c, bits);
    } else {
      std::vector<float> f(bits.size());
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::bit_cast<float>(bits[i]);
      a = ArrayContainer::make_f32(h, w, c, f);
    }
    store_array(a, dir / "r.alf");
    ASSERT_EQ(load_array(dir / "r.alf"), a) << "trial " << trial;
  }
}

namespace {
std::string header(std::uint32_t h, std::uint32_t w, std::uint32_t c, std::uint32_t dtype, const char* magic = "ALF1",
                   std::uint32_t version = 1) {
  std::string s(magic, 4);
  for (std::uint32_t v : {version, h, w, c, dtype})
    for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  return s;
}

std::string load_error(const testutil::TempDir& dir, const std::string& bytes) {
  testutil::spit(dir / "bad.alf", bytes);
  try {
    load_array(dir / "bad.alf");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::format);
    return e.what();
  }
  ADD_FAILURE() << "expected a format error";
  return {};
}
}  // namespace

TEST(ArrayStore, RejectsTruncatedPayload) {
  TempDir dir;
  const auto msg = load_error(dir, header(2, 2, 1, 0) + std::string(12, '\0'));
  EXPECT_NE(msg.find("truncated payload"), std::string::npos) << msg;
}

TEST(ArrayStore, RejectsTrailingBytes) {
  TempDir dir;
  const auto msg = load_error(dir, header(1, 1, 1, 0) + std::string(8, '\0'));
  EXPECT_NE(msg.find("trailing"), std::string::npos) << msg;
}

TEST(ArrayStore, RejectsUnknownDtype) {
  TempDir dir;
  const auto msg = load_error(dir, header(1, 1, 1, 7) + std::string(4, '\0'));
  EXPECT_NE(msg.find("dtype"), std::string::npos) << msg;
}

TEST(ArrayStore, RejectsBadMagicVersionAndZeroDims) {
  TempDir dir;
  EXPECT_NE(load_error(dir, header(1, 1, 1, 0, "ALF2") + std::string(4, '\0')).find("magic"), std::string::npos);
  EXPECT_NE(load_error(dir, header(1, 1, 1, 0, "ALF1", 2) + std::string(4, '\0')).find("version"), std::string::npos);
  EXPECT_NE(load_error(dir, header(0, 1, 1, 0)).find("height"), std::string::npos);
  EXPECT_NE(load_error(dir, header(1, 0, 1, 0)).find("width"), std::string::npos);
  EXPECT_NE(load_error(dir, header(1, 1, 0, 0)).find("channels"), std::string::npos);
  EXPECT_NE(load_error(dir, "ALF1").find("header"), std::string::npos);
}

TEST(ArrayStore, MissingFileIsStorageError) {
  TempDir dir;
  try {
    load_array(dir / "nope.alf");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::storage);
    EXPECT_NE(std::string(e.what()).find("nope.alf"), std::string::npos);
  }
  EXPECT_THROW(store_array(ArrayContainer::make_f32(1, 1, 1), dir / "no_such_dir" / "x.alf"), Error);
}

TEST(ArrayContainer, ConstructionInvariants) {
  EXPECT_THROW(ArrayContainer::make_f32(0, 1, 1), Error);
  EXPECT_THROW(ArrayContainer::make_f32(2, 2, 1, {1.0f, 2.0f, 3.0f}), Error);
  const auto a = ArrayContainer::make_u32(2, 3, 4);
  EXPECT_EQ(a.size(), 24u);
  EXPECT_EQ(a.index(1, 2, 3), 23u);
  EXPECT_THROW((void)a.f32(), Error);
}
