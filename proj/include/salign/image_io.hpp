#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "salign/tensor.hpp"

namespace salign::io {

/// 8-bit interleaved image: 1 channel (gray) or 3 channels (color).
struct Image {
  int channels = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> bytes;  // row-major, channel-interleaved

  bool operator==(const Image&) const = default;
};

/// Parses binary PGM (P5) or PPM (P6) with maxval 255.
Image decode_pnm(const std::vector<std::uint8_t>& file);
std::vector<std::uint8_t> encode_pnm(const Image& image);

Image read_image(const std::filesystem::path& path);
/// Writes via a temporary file in the same directory and renames it into place.
void write_image(const std::filesystem::path& path, const Image& image);

/// (1, C, H, W) tensor with values byte / 255.
Tensor to_tensor(const Image& image);
/// Quantizes sample `n` of a (B, 1|3, H, W) tensor: round(clamp(v, 0, 1) * 255).
Image from_tensor(const Tensor& t, std::int64_t n = 0);

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace salign::io
