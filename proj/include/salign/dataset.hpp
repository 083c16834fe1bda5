#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "salign/synthdata.hpp"
#include "salign/tensor.hpp"

namespace salign::data {

struct Sample {
  std::string id;
  Tensor rgb;      // (1, 3, S, S)
  Tensor thermal;  // (1, 3, S, S)
  Tensor gt;       // (1, 1, S, S)
};

struct ManifestEntry {
  std::string id;
  std::string rgb;  // paths relative to the dataset directory
  std::string thermal;
  std::string gt;
  synth::Affine true_affine;
};

struct Manifest {
  std::int64_t size = 0;
  synth::SceneSpec spec;
  std::vector<ManifestEntry> samples;
};

/// Zero-padded sample id, at least four digits.
std::string sample_id(std::int64_t index, std::int64_t count);

/// Generates `count` pairs of `spec` into `dir`:
///   rgb/NNNN.ppm, thermal/NNNN.ppm, gt/NNNN.pgm, manifest.json.
/// Refuses a non-empty directory unless `force`, in which case the previous
/// layout (those three folders and the manifest) is replaced.
Manifest write_dataset(const std::filesystem::path& dir, const synth::SceneSpec& spec, std::int64_t count,
                       bool force);

Manifest read_manifest(const std::filesystem::path& dir);

struct LoadResult {
  Manifest manifest;
  std::vector<Sample> samples;
  /// One line per sample that could not be read; those samples are skipped.
  std::vector<std::string> errors;
};

LoadResult load_dataset(const std::filesystem::path& dir);

}  // namespace salign::data
