#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "salign/tensor.hpp"

namespace salign::ckpt {

inline constexpr char kMagic[4] = {'A', 'L', 'S', 'K'};
inline constexpr std::uint32_t kVersion = 1;

struct Entry {
  std::string name;
  Tensor value;
};

/// In-memory form of the checkpoint file:
///   "ALSK" | u32 version | u64 manifest length | manifest JSON | f32 payload
/// All integers and floats little-endian. The manifest holds `meta` (free-form)
/// and `tensors`: [{name, shape, dtype "f32", offset, length}], offsets relative
/// to the payload start, contiguous and in order.
struct Checkpoint {
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::vector<Entry> tensors;

  /// Throws ContractError if `name` is absent.
  const Tensor& find(const std::string& name) const;
  bool contains(const std::string& name) const;
};

/// Values are rounded to 32-bit floats.
std::vector<std::uint8_t> encode(const Checkpoint& checkpoint);
/// Throws ParseError (with byte offset) on malformed input.
Checkpoint decode(std::span<const std::uint8_t> bytes);

void save(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load(const std::filesystem::path& path);

}  // namespace salign::ckpt
