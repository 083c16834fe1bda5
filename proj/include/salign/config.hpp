#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "salign/network.hpp"
#include "salign/synthdata.hpp"

namespace salign {

struct TrainConfig {
  std::int64_t epochs = 300;
  std::int64_t batch_size = 8;
  double learning_rate = 3e-5;
  /// The learning rate is multiplied by lr_decay every lr_step epochs.
  std::int64_t lr_step = 100;
  double lr_decay = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Random horizontal flip and quarter-turn rotation applied jointly to a pair and its mask.
  bool augment = true;
  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate_at(std::int64_t epoch) const;
};

struct PathsConfig {
  std::string data_dir = "data";
  std::string out_dir = "run";
};

/// Everything a command needs. Serialized as a JSON object with sections
/// model, train, scene, scal, paths; unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  synth::SceneSpec scene;
  /// Number of pairs `gen` writes.
  std::int64_t scene_count = 8;
  PathsConfig paths;

  /// Validates every section plus cross-section agreement (model size = scene size).
  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& config);
/// Fields absent from `j` keep their defaults. Throws ConfigError on unknown
/// keys or wrong value types.
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const ModelConfig& config);
nlohmann::ordered_json to_json(const synth::SceneSpec& spec);
synth::SceneSpec scene_spec_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

}  // namespace salign
