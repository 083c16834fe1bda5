#include "salign/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "salign/errors.hpp"

namespace salign::io {

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::vector<std::uint8_t>& data, std::size_t start) : data_(data), pos_(start) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      const char c = static_cast<char>(data_[pos_]);
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::int64_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::int64_t v = 0;
    while (pos_ < data_.size() && std::isdigit(data_[pos_])) {
      v = v * 10 + (data_[pos_] - '0');
      if (v > (std::int64_t{1} << 31)) throw ParseError(std::string("header ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("expected ") + what + " in header", start);
    return v;
  }

  /// Exactly one whitespace byte separates maxval from the raster.
  void single_whitespace() {
    if (pos_ >= data_.size() || !std::isspace(data_[pos_])) {
      throw ParseError("expected whitespace before pixel data", pos_);
    }
    ++pos_;
  }

 private:
  const std::vector<std::uint8_t>& data_;
  std::size_t pos_;
};

}  // namespace

Image decode_pnm(const std::vector<std::uint8_t>& file) {
  if (file.size() < 2 || file[0] != 'P' || (file[1] != '5' && file[1] != '6')) {
    throw ParseError("unsupported magic: expected P5 or P6", 0);
  }
  Image img;
  img.channels = file[1] == '5' ? 1 : 3;
  if (file.size() < 3 || !std::isspace(file[2])) throw ParseError("expected whitespace after magic", 2);
  HeaderReader h(file, 2);
  h.skip_space_and_comments();
  const std::size_t w_at = h.pos();
  img.width = h.number("width");
  img.height = h.number("height");
  h.skip_space_and_comments();
  const std::size_t maxval_at = h.pos();
  const std::int64_t maxval = h.number("maxval");
  if (img.width <= 0 || img.height <= 0) throw ParseError("image extents must be positive", w_at);
  if (maxval != 255) {
    throw ParseError("unsupported depth: maxval " + std::to_string(maxval) + " (only 8-bit, maxval 255)", maxval_at);
  }
  h.single_whitespace();
  const std::size_t data_at = h.pos();
  const std::size_t need = static_cast<std::size_t>(img.width * img.height * img.channels);
  if (file.size() - data_at < need) {
    throw ParseError("truncated pixel data: expected " + std::to_string(need) + " bytes, found " +
                         std::to_string(file.size() - data_at),
                     file.size());
  }
  img.bytes.assign(file.begin() + static_cast<std::ptrdiff_t>(data_at),
                   file.begin() + static_cast<std::ptrdiff_t>(data_at + need));
  return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw ContractError("encode_pnm: channels must be 1 or 3, got " + std::to_string(image.channels));
  }
  if (image.bytes.size() != static_cast<std::size_t>(image.width * image.height * image.channels)) {
    throw ContractError("encode_pnm: byte count does not match extents");
  }
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.bytes.begin(), image.bytes.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Image read_image(const std::filesystem::path& path) {
  try {
    return decode_pnm(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

void write_image(const std::filesystem::path& path, const Image& image) { write_file_atomic(path, encode_pnm(image)); }

Tensor to_tensor(const Image& image) {
  Tensor t = Tensor::zeros({1, image.channels, image.height, image.width});
  const std::int64_t P = image.height * image.width;
  auto v = t.mutable_data();
  for (std::int64_t p = 0; p < P; ++p) {
    for (int c = 0; c < image.channels; ++c) v[c * P + p] = image.bytes[p * image.channels + c] / 255.0;
  }
  return t;
}

Image from_tensor(const Tensor& t, std::int64_t n) {
  const Shape s = t.shape();
  if (s.c != 1 && s.c != 3) throw DimensionError("from_tensor: expected 1 or 3 channels, got " + s.str());
  Image img{static_cast<int>(s.c), s.h, s.w, {}};
  img.bytes.resize(static_cast<std::size_t>(s.c * s.plane()));
  const std::int64_t P = s.plane();
  auto v = t.data();
  for (std::int64_t p = 0; p < P; ++p) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      const double x = std::clamp(v[(n * s.c + c) * P + p], 0.0, 1.0);
      img.bytes[p * s.c + c] = static_cast<std::uint8_t>(std::lround(x * 255.0));
    }
  }
  return img;
}

}  // namespace salign::io
