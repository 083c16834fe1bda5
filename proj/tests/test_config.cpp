#include <gtest/gtest.h>

#include "salign/config.hpp"
#include "salign/errors.hpp"

using namespace salign;
using nlohmann::json;

TEST(RunConfig, DefaultsMatchReferenceHyperparameters) {
  const RunConfig c;
  EXPECT_EQ(c.model.scal.k, 3);
  EXPECT_EQ(c.model.scal.t, 0.4);
  EXPECT_EQ(c.model.filters, 4);
  EXPECT_EQ(c.model.beta1, 1.0);
  EXPECT_EQ(c.model.beta2, 1.0);
  EXPECT_EQ(c.train.learning_rate, 3e-5);
  EXPECT_EQ(c.train.batch_size, 8);
  EXPECT_EQ(c.train.epochs, 300);
  EXPECT_EQ(c.train.adam_beta1, 0.9);
  EXPECT_EQ(c.train.adam_beta2, 0.999);
  EXPECT_EQ(c.train.adam_epsilon, 1e-8);
  EXPECT_EQ(c.scene.max_translation, 6.0);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, LearningRateDropsTenfoldEveryHundredEpochs) {
  const TrainConfig t;
  EXPECT_EQ(t.learning_rate_at(0), 3e-5);
  EXPECT_EQ(t.learning_rate_at(99), 3e-5);
  EXPECT_DOUBLE_EQ(t.learning_rate_at(100), 3e-6);
  EXPECT_DOUBLE_EQ(t.learning_rate_at(250), 3e-7);
}

TEST(RunConfig, PrintedConfigReadsBackLosslessly) {
  RunConfig c;
  c.train.learning_rate = 1.234567890123e-4;
  c.model.scal.anchor = scal::Anchor::rgb;
  c.model.use_saf = false;
  c.scene.seed = 18446744073709551615ull;
  c.scene_count = 17;
  c.paths.data_dir = "some/dir";
  const std::string text = dump_run_config(c);
  const RunConfig back = run_config_from_json(json::parse(text));
  EXPECT_EQ(dump_run_config(back), text);
  EXPECT_EQ(back.train.learning_rate, c.train.learning_rate);
  EXPECT_EQ(back.scene.seed, c.scene.seed);
  EXPECT_EQ(back.model.scal.anchor, scal::Anchor::rgb);
}

TEST(RunConfig, PartialConfigKeepsDefaults) {
  const RunConfig c = run_config_from_json(json::parse(R"({"train": {"epochs": 5}})"));
  EXPECT_EQ(c.train.epochs, 5);
  EXPECT_EQ(c.train.batch_size, 8);
}

TEST(RunConfig, UnknownKeysAreRejectedWithTheirPath) {
  for (const char* text : {R"({"trian": {}})", R"({"train": {"epoch": 3}})", R"({"scal": {"K": 3}})",
                           R"({"model": {"scal": {"k": 3}}})"}) {
    try {
      run_config_from_json(json::parse(text));
      FAIL() << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find("unknown config key"), std::string::npos) << text;
    }
  }
}

TEST(RunConfig, WrongTypesAreRejected) {
  EXPECT_THROW(run_config_from_json(json::parse(R"({"train": {"epochs": 1.5}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"train": {"augment": 1}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"model": {"encoder_channels": [1, 2, 3]}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"scal": {"anchor": "depth"}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"scene": {"seed": -1}})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"([1, 2])")), ConfigError);
}

TEST(RunConfig, CrossSectionSizeMismatchIsAConfigError) {
  RunConfig c;
  c.scene.size = 64;
  EXPECT_THROW(c.validate(), ConfigError);
  c.model.input_size = 64;
  EXPECT_NO_THROW(c.validate());
}

TEST(ModelConfigJson, RoundTripIncludesAlignmentSettings) {
  ModelConfig m;
  m.scal.k = 5;
  m.scal.c_compressed = 7;
  m.encoder_channels = {8, 8, 16, 16};
  const ModelConfig back = model_config_from_json(json::parse(to_json(m).dump()));
  EXPECT_EQ(back.scal.k, 5);
  EXPECT_EQ(back.scal.c_compressed, 7);
  EXPECT_EQ(back.encoder_channels, m.encoder_channels);
}
