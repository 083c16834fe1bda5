#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>

#include "salign/errors.hpp"
#include "salign/image_io.hpp"

using namespace salign;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("salign_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::size_t parse_offset(const std::vector<std::uint8_t>& file) {
  try {
    io::decode_pnm(file);
  } catch (const ParseError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected ParseError";
  return 0;
}

}  // namespace

TEST(ImageIo, RandomColorImageRoundTripsThroughDisk) {
  std::mt19937 rng(3);
  io::Image img{3, 7, 5, {}};
  img.bytes.resize(3 * 7 * 5);
  for (auto& b : img.bytes) b = static_cast<std::uint8_t>(rng() & 0xff);
  const auto dir = temp_dir("roundtrip");
  io::write_image(dir / "a.ppm", img);
  EXPECT_EQ(io::read_image(dir / "a.ppm"), img);
  EXPECT_FALSE(std::filesystem::exists(dir / "a.ppm.tmp"));
}

TEST(ImageIo, GrayPayloadScalesByMaxval) {
  std::string file = "P5\n2 2\n255\n";
  file += std::string{'\x00', '\x80', '\xff', '\x40'};
  const Tensor t = io::to_tensor(io::decode_pnm(bytes_of(file)));
  EXPECT_EQ(t.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(t.at(0, 0, 0, 0), 0.0);
  EXPECT_EQ(t.at(0, 0, 0, 1), 128.0 / 255.0);
  EXPECT_EQ(t.at(0, 0, 1, 0), 1.0);
  EXPECT_EQ(t.at(0, 0, 1, 1), 64.0 / 255.0);
}

TEST(ImageIo, SixteenBitDepthIsRejected) {
  const std::string file = "P5\n2 2\n65535\n" + std::string(8, '\0');
  try {
    io::decode_pnm(bytes_of(file));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported depth"), std::string::npos);
    EXPECT_EQ(e.offset(), 7u);
  }
}

TEST(ImageIo, HeaderCommentsAreSkipped) {
  const std::string file = "P5\n# made by hand\n1 1\n255\n\x2a";
  const io::Image img = io::decode_pnm(bytes_of(file));
  ASSERT_EQ(img.bytes.size(), 1u);
  EXPECT_EQ(img.bytes[0], 0x2a);
}

TEST(ImageIo, MalformedFilesReportByteOffsets) {
  EXPECT_EQ(parse_offset(bytes_of("P3\n1 1\n255\n\x01")), 0u);
  EXPECT_EQ(parse_offset(bytes_of("P5\nx 1\n255\n\x01")), 3u);
  const std::string truncated = "P6\n2 1\n255\n\x01\x02\x03";
  EXPECT_EQ(parse_offset(bytes_of(truncated)), truncated.size());
}

TEST(ImageIo, TensorQuantizationInvertsScaling) {
  io::Image img{1, 1, 256, {}};
  for (int i = 0; i < 256; ++i) img.bytes.push_back(static_cast<std::uint8_t>(i));
  EXPECT_EQ(io::from_tensor(io::to_tensor(img)), img);
}

TEST(ImageIo, FromTensorClampsOutOfRange) {
  Tensor t = Tensor::zeros({1, 1, 1, 2});
  t.at(0, 0, 0, 0) = -0.3;
  t.at(0, 0, 0, 1) = 1.7;
  const io::Image img = io::from_tensor(t);
  EXPECT_EQ(img.bytes[0], 0);
  EXPECT_EQ(img.bytes[1], 255);
}

TEST(ImageIo, ReadErrorNamesThePath) {
  const auto dir = temp_dir("bad");
  io::write_text_atomic(dir / "bad.pgm", "P5\n1 1\n65535\n\x01\x01");
  try {
    io::read_image(dir / "bad.pgm");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.pgm"), std::string::npos);
  }
}
