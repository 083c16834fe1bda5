#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "salign/dataset.hpp"
#include "salign/errors.hpp"
#include "salign/image_io.hpp"
#include "salign/train.hpp"
#include "test_util.hpp"

using namespace salign;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.input_size = 32;
  cfg.encoder_channels = {4, 4, 8, 8};
  cfg.filters = 2;
  return cfg;
}

synth::SceneSpec tiny_scene(std::uint64_t seed = 3) {
  synth::SceneSpec spec;
  spec.size = 32;
  spec.max_translation = 2.0;
  spec.seed = seed;
  return spec;
}

std::vector<data::Sample> tiny_samples(int count) {
  std::vector<data::Sample> out;
  for (int i = 0; i < count; ++i) {
    const auto p = synth::gen_scene(tiny_scene(), static_cast<std::uint64_t>(i));
    out.push_back({std::to_string(i), p.rgb, p.thermal, p.gt});
  }
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("salign_train_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<double> snapshot(const Model& model) {
  std::vector<double> out;
  for (const auto& [name, t] : model.parameters()) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

}  // namespace

TEST(Dataset, ManifestIsExhaustiveAndParses) {
  const auto dir = fresh_dir("manifest");
  const auto m = data::write_dataset(dir, tiny_scene(), 3, false);
  ASSERT_EQ(m.samples.size(), 3u);
  const auto read = data::read_manifest(dir);
  ASSERT_EQ(read.samples.size(), 3u);
  for (const auto& e : read.samples) {
    for (const auto& rel : {e.rgb, e.thermal, e.gt}) {
      ASSERT_TRUE(fs::exists(dir / rel)) << rel;
      EXPECT_NO_THROW(io::read_image(dir / rel)) << rel;
    }
  }
  EXPECT_EQ(read.samples[1].id, "0001");
  EXPECT_EQ(read.samples[1].rgb, "rgb/0001.ppm");
  const auto loaded = data::load_dataset(dir);
  EXPECT_TRUE(loaded.errors.empty());
  EXPECT_EQ(loaded.samples.size(), 3u);
}

TEST(Dataset, LoadedSamplesMatchQuantizedGenerator) {
  const auto dir = fresh_dir("quantized");
  data::write_dataset(dir, tiny_scene(), 2, false);
  const auto loaded = data::load_dataset(dir);
  const auto pair = synth::gen_scene(tiny_scene(), 1);
  EXPECT_EQ(io::from_tensor(loaded.samples[1].rgb), io::from_tensor(pair.rgb));
  EXPECT_EQ(io::from_tensor(loaded.samples[1].thermal), io::from_tensor(pair.thermal));
  EXPECT_EQ(salign::testing::max_abs_diff(loaded.samples[1].gt.data(), pair.gt.data()), 0.0);
}

TEST(Dataset, RefusesNonEmptyDirectoryWithoutForce) {
  const auto dir = fresh_dir("force");
  data::write_dataset(dir, tiny_scene(), 2, false);
  const auto before = io::read_file(dir / "rgb/0001.ppm");
  EXPECT_THROW(data::write_dataset(dir, tiny_scene(), 2, false), ConfigError);
  io::write_text_atomic(dir / "notes.txt", "keep");
  data::write_dataset(dir, tiny_scene(), 2, true);
  EXPECT_EQ(io::read_file(dir / "rgb/0001.ppm"), before);
  EXPECT_TRUE(fs::exists(dir / "notes.txt"));
}

TEST(Dataset, ZeroCountWritesManifestOnly) {
  const auto dir = fresh_dir("empty");
  data::write_dataset(dir, tiny_scene(), 0, false);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(data::read_manifest(dir).samples.empty());
  EXPECT_TRUE(fs::is_empty(dir / "rgb"));
}

TEST(Dataset, MissingFileIsAPerSampleError) {
  const auto dir = fresh_dir("missing");
  data::write_dataset(dir, tiny_scene(), 3, false);
  fs::remove(dir / "gt/0001.pgm");
  const auto loaded = data::load_dataset(dir);
  ASSERT_EQ(loaded.errors.size(), 1u);
  EXPECT_EQ(loaded.errors[0].rfind("0001: ", 0), 0u);
  EXPECT_EQ(loaded.samples.size(), 2u);
}

TEST(Augment, GroupIdentities) {
  const Tensor x = salign::testing::random_tensor({1, 2, 5, 5}, 4);
  auto same = [&](const Tensor& y) { return salign::testing::max_abs_diff(x.data(), y.data()) == 0.0; };
  EXPECT_TRUE(same(train::augment(x, {})));
  EXPECT_TRUE(same(train::augment(train::augment(x, {true, 0}), {true, 0})));
  Tensor r = x;
  for (int i = 0; i < 4; ++i) r = train::augment(r, {false, 1});
  EXPECT_TRUE(same(r));
  EXPECT_FALSE(same(train::augment(x, {false, 1})));
}

TEST(Augment, QuarterTurnMovesCorners) {
  Tensor x = Tensor::zeros({1, 1, 3, 3});
  x.at(0, 0, 0, 0) = 1.0;
  const Tensor r = train::augment(x, {false, 1});
  // One turn sends the top-left corner to a different corner, and flips preserve the count.
  double sum = 0.0;
  for (double v : r.data()) sum += v;
  EXPECT_EQ(sum, 1.0);
  EXPECT_EQ(r.at(0, 0, 0, 0), 0.0);
  const double corners = r.at(0, 0, 0, 2) + r.at(0, 0, 2, 0) + r.at(0, 0, 2, 2);
  EXPECT_EQ(corners, 1.0);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  const Model model(tiny_config(), 1);
  train::Adam adam(model.parameters(), {});
  for (auto& [name, p] : model.parameters()) Tensor(p).grad_buffer();
  const auto before = snapshot(model);
  adam.step(1e-3);
  EXPECT_EQ(snapshot(model), before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor w = Tensor::from({1, 1, 1, 3}, {1.0, 1.0, 1.0});
  w.set_requires_grad(true);
  auto g = w.grad_buffer();
  g[0] = 4.0;
  g[1] = -0.25;
  g[2] = 0.0;
  train::Adam adam({{"w", w}}, {0.9, 0.999, 0.0});
  adam.step(0.01);
  EXPECT_NEAR(w.data()[0], 0.99, 1e-15);
  EXPECT_NEAR(w.data()[1], 1.01, 1e-15);
}

TEST(Train, ZeroEpochsKeepsInitialization) {
  const Model model(tiny_config(), 4);
  const auto init = ckpt::encode(train::make_checkpoint(model, nullptr, 0));
  train::Adam adam(model.parameters(), {});
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = train::fit(model, adam, tiny_samples(2), cfg);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(ckpt::encode(train::make_checkpoint(model, nullptr, 0)), init);
}

TEST(Train, SameSeedGivesIdenticalLogs) {
  const auto samples = tiny_samples(4);
  auto run = [&]() {
    const Model model(tiny_config(), 6);
    train::Adam adam(model.parameters(), {});
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.learning_rate = 1e-3;
    cfg.seed = 6;
    std::string log = train::log_header();
    train::Hooks hooks;
    hooks.on_epoch = [&](const train::EpochRecord& r) { log += train::log_row(r); };
    train::fit(model, adam, samples, cfg, hooks);
    return log;
  };
  const std::string a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
}

TEST(Train, DisabledAlignmentLossLogsZero) {
  ModelConfig mc = tiny_config();
  mc.use_scal = false;
  const Model model(mc, 2);
  train::Adam adam(model.parameters(), {});
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto r = train::fit(model, adam, tiny_samples(2), cfg);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].loss.scal, 0.0);
  EXPECT_GT(r.log[0].loss.total, 0.0);
}

TEST(Train, MovingAverageLossDecreases) {
  // Default learning rate, 50 steps on one batch: the later half averages lower.
  const auto samples = tiny_samples(4);
  const Model model(tiny_config(), 8);
  train::Adam adam(model.parameters(), {});
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  const auto batch = train::make_batch(samples, idx);
  const double lr = TrainConfig{}.learning_rate;
  std::vector<double> losses;
  for (int s = 0; s < 50; ++s) losses.push_back(train::train_step(model, adam, batch, lr).total);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 25; ++i) {
    first += losses[i];
    last += losses[25 + i];
  }
  EXPECT_LT(last, first);
}

TEST(Train, NonFiniteLossNamesTheFirstBadOp) {
  const Model model(tiny_config(), 3);
  auto params = model.parameters();
  for (auto& [name, t] : params) {
    if (name == "head.bias") t.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  }
  train::Adam adam(params, {});
  const auto samples = tiny_samples(1);
  const std::vector<std::size_t> idx{0};
  try {
    train::train_step(model, adam, train::make_batch(samples, idx), 1e-3);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("first produced by op"), std::string::npos) << e.what();
  }
}

TEST(Train, PredictionIsAProbabilityMap) {
  const Model model(tiny_config(), 1);
  const auto samples = tiny_samples(1);
  const Tensor p = train::predict(model, samples[0]);
  EXPECT_EQ(p.shape(), (Shape{1, 1, 32, 32}));
  for (double v : p.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}
