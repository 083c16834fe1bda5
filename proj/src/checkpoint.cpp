#include "salign/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "salign/errors.hpp"
#include "salign/image_io.hpp"

namespace salign::ckpt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
static_assert(std::numeric_limits<float>::is_iec559);

namespace {

constexpr std::size_t kHeaderSize = 4 + 4 + 8;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t at) {
  T value;
  std::memcpy(&value, bytes.data() + at, sizeof(T));
  return value;
}

}  // namespace

const Tensor& Checkpoint::find(const std::string& name) const {
  for (const Entry& e : tensors) {
    if (e.name == name) return e.value;
  }
  throw ContractError("checkpoint has no tensor named '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const Entry& e : tensors) {
    if (e.name == name) return true;
  }
  return false;
}

std::vector<std::uint8_t> encode(const Checkpoint& checkpoint) {
  nlohmann::ordered_json manifest;
  manifest["meta"] = checkpoint.meta;
  manifest["tensors"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const Entry& e : checkpoint.tensors) {
    const Shape s = e.value.shape();
    const std::uint64_t length = 4 * static_cast<std::uint64_t>(s.numel());
    manifest["tensors"].push_back(
        {{"name", e.name}, {"shape", {s.n, s.c, s.h, s.w}}, {"dtype", "f32"}, {"offset", offset}, {"length", length}});
    offset += length;
  }
  const std::string text = manifest.dump();

  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + text.size() + offset);
  out.insert(out.end(), kMagic, kMagic + 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const Entry& e : checkpoint.tensors) {
    for (double v : e.value.data()) put<float>(out, static_cast<float>(v));
  }
  return out;
}

Checkpoint decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw ParseError("checkpoint shorter than its header", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("bad checkpoint magic (expected ALSK)", 0);
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto manifest_len = get<std::uint64_t>(bytes, 8);
  if (manifest_len > bytes.size() - kHeaderSize) throw ParseError("manifest runs past end of file", 8);
  const std::size_t payload_at = kHeaderSize + static_cast<std::size_t>(manifest_len);

  nlohmann::ordered_json manifest;
  try {
    manifest = nlohmann::ordered_json::parse(bytes.begin() + kHeaderSize, bytes.begin() + payload_at);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what(), kHeaderSize);
  }
  if (!manifest.is_object() || !manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    throw ParseError("manifest lacks a tensors array", kHeaderSize);
  }

  Checkpoint out;
  if (manifest.contains("meta")) out.meta = manifest["meta"];
  const std::size_t payload_size = bytes.size() - payload_at;
  std::uint64_t expected_offset = 0;
  for (const auto& t : manifest["tensors"]) {
    try {
      const auto name = t.at("name").get<std::string>();
      const auto shape = t.at("shape").get<std::vector<std::int64_t>>();
      const auto dtype = t.at("dtype").get<std::string>();
      const auto offset = t.at("offset").get<std::uint64_t>();
      const auto length = t.at("length").get<std::uint64_t>();
      if (dtype != "f32") throw ParseError("tensor '" + name + "' has unsupported dtype " + dtype, kHeaderSize);
      if (shape.size() != 4) throw ParseError("tensor '" + name + "' shape is not rank 4", kHeaderSize);
      const Shape s{shape[0], shape[1], shape[2], shape[3]};
      if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0 || 4 * static_cast<std::uint64_t>(s.numel()) != length) {
        throw ParseError("tensor '" + name + "' length does not match its shape", kHeaderSize);
      }
      if (offset != expected_offset) {
        throw ParseError("tensor '" + name + "' offset " + std::to_string(offset) + " is not contiguous (expected " +
                             std::to_string(expected_offset) + ")",
                         kHeaderSize);
      }
      if (offset + length > payload_size) {
        throw ParseError("tensor '" + name + "' runs past end of payload", payload_at + payload_size);
      }
      Tensor value = Tensor::zeros(s);
      auto v = value.mutable_data();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = get<float>(bytes, payload_at + offset + 4 * i);
      out.tensors.push_back({name, value});
      expected_offset = offset + length;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed tensor entry: ") + e.what(), kHeaderSize);
    }
  }
  if (expected_offset != payload_size) {
    throw ParseError("payload has " + std::to_string(payload_size - expected_offset) + " trailing bytes",
                     payload_at + expected_offset);
  }
  return out;
}

void save(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  io::write_file_atomic(path, encode(checkpoint));
}

Checkpoint load(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return decode(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace salign::ckpt
