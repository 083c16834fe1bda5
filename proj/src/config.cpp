#include "salign/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "salign/errors.hpp"

namespace salign {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

/// Reads typed fields from one JSON object and rejects anything it did not read.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  void read(const char* key, std::int64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<std::int64_t>();
    }
  }
  void read(const char* key, int& out) {
    std::int64_t v = out;
    read(key, v);
    out = static_cast<int>(v);
  }
  void read(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        fail(key, "a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::array<std::int64_t, kLevels>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != kLevels) fail(key, "an array of 4 integers");
      for (int i = 0; i < kLevels; ++i) {
        if (!(*v)[i].is_number_integer()) fail(key, "an array of 4 integers");
        out[i] = (*v)[i].get<std::int64_t>();
      }
    }
  }
  const json* sub(const char* key) { return find(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ConfigError("config key '" + name_ + "." + key + "' must be " + expected);
  }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

ordered_json scal_json(const scal::ScalConfig& s) {
  return {{"k", s.k},
          {"t", s.t},
          {"c_compressed", s.c_compressed},
          {"epsilon", s.epsilon},
          {"anchor", s.anchor == scal::Anchor::thermal ? "thermal" : "rgb"}};
}

void read_scal(const json& j, const std::string& name, scal::ScalConfig& s) {
  Section sec(j, name);
  sec.read("k", s.k);
  sec.read("t", s.t);
  sec.read("c_compressed", s.c_compressed);
  sec.read("epsilon", s.epsilon);
  std::string anchor = s.anchor == scal::Anchor::thermal ? "thermal" : "rgb";
  sec.read("anchor", anchor);
  if (anchor == "thermal") {
    s.anchor = scal::Anchor::thermal;
  } else if (anchor == "rgb") {
    s.anchor = scal::Anchor::rgb;
  } else {
    throw ConfigError("config key '" + name + ".anchor' must be \"thermal\" or \"rgb\", got \"" + anchor + "\"");
  }
  sec.finish();
}

ordered_json model_fields(const ModelConfig& m) {
  return {{"input_size", m.input_size},
          {"encoder_channels", m.encoder_channels},
          {"filters", m.filters},
          {"ffn_expansion", m.ffn_expansion},
          {"beta1", m.beta1},
          {"beta2", m.beta2},
          {"use_scal", m.use_scal},
          {"use_saf", m.use_saf}};
}

void read_model_fields(Section& sec, ModelConfig& m) {
  sec.read("input_size", m.input_size);
  sec.read("encoder_channels", m.encoder_channels);
  sec.read("filters", m.filters);
  sec.read("ffn_expansion", m.ffn_expansion);
  sec.read("beta1", m.beta1);
  sec.read("beta2", m.beta2);
  sec.read("use_scal", m.use_scal);
  sec.read("use_saf", m.use_saf);
}

void read_scene_fields(Section& sec, synth::SceneSpec& sp) {
  sec.read("size", sp.size);
  sec.read("min_objects", sp.min_objects);
  sec.read("max_objects", sp.max_objects);
  sec.read("rgb_noise", sp.rgb_noise);
  sec.read("thermal_noise", sp.thermal_noise);
  sec.read("thermal_contrast_min", sp.thermal_contrast_min);
  sec.read("thermal_contrast_max", sp.thermal_contrast_max);
  sec.read("max_translation", sp.max_translation);
  sec.read("scale_min", sp.scale_min);
  sec.read("scale_max", sp.scale_max);
  sec.read("max_rotation_deg", sp.max_rotation_deg);
  sec.read("seed", sp.seed);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be > 0");
  if (lr_step < 1) throw ConfigError("train.lr_step must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train.lr_decay must lie in (0, 1]");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("train adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("train.adam_epsilon must be > 0");
}

double TrainConfig::learning_rate_at(std::int64_t epoch) const {
  return learning_rate * std::pow(lr_decay, static_cast<double>(epoch / lr_step));
}

void RunConfig::validate() const {
  // Scene first: its size constraint is the one users set when generating data.
  scene.validate();
  model.validate();
  train.validate();
  if (scene_count < 0) throw ConfigError("scene.count must be >= 0");
  if (model.input_size != scene.size) {
    throw ConfigError("model.input_size (" + std::to_string(model.input_size) + ") must equal scene.size (" +
                      std::to_string(scene.size) + ")");
  }
}

ordered_json to_json(const synth::SceneSpec& s) {
  return {{"size", s.size},
          {"min_objects", s.min_objects},
          {"max_objects", s.max_objects},
          {"rgb_noise", s.rgb_noise},
          {"thermal_noise", s.thermal_noise},
          {"thermal_contrast_min", s.thermal_contrast_min},
          {"thermal_contrast_max", s.thermal_contrast_max},
          {"max_translation", s.max_translation},
          {"scale_min", s.scale_min},
          {"scale_max", s.scale_max},
          {"max_rotation_deg", s.max_rotation_deg},
          {"seed", s.seed}};
}

synth::SceneSpec scene_spec_from_json(const json& j) {
  synth::SceneSpec spec;
  Section sec(j, "scene");
  read_scene_fields(sec, spec);
  sec.finish();
  return spec;
}

ordered_json to_json(const ModelConfig& config) {
  ordered_json j = model_fields(config);
  j["scal"] = scal_json(config.scal);
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  Section sec(j, "model");
  read_model_fields(sec, m);
  if (const json* s = sec.sub("scal")) read_scal(*s, "model.scal", m.scal);
  sec.finish();
  return m;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["model"] = model_fields(c.model);
  const TrainConfig& t = c.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"lr_step", t.lr_step},
                {"lr_decay", t.lr_decay},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_epsilon", t.adam_epsilon},
                {"augment", t.augment},
                {"seed", t.seed}};
  j["scene"] = to_json(c.scene);
  j["scene"]["count"] = c.scene_count;
  j["scal"] = scal_json(c.model.scal);
  j["paths"] = {{"data_dir", c.paths.data_dir}, {"out_dir", c.paths.out_dir}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "<root>");
  if (const json* m = root.sub("model")) {
    Section sec(*m, "model");
    read_model_fields(sec, c.model);
    sec.finish();
  }
  if (const json* t = root.sub("train")) {
    Section sec(*t, "train");
    sec.read("epochs", c.train.epochs);
    sec.read("batch_size", c.train.batch_size);
    sec.read("learning_rate", c.train.learning_rate);
    sec.read("lr_step", c.train.lr_step);
    sec.read("lr_decay", c.train.lr_decay);
    sec.read("adam_beta1", c.train.adam_beta1);
    sec.read("adam_beta2", c.train.adam_beta2);
    sec.read("adam_epsilon", c.train.adam_epsilon);
    sec.read("augment", c.train.augment);
    sec.read("seed", c.train.seed);
    sec.finish();
  }
  if (const json* s = root.sub("scene")) {
    Section sec(*s, "scene");
    sec.read("count", c.scene_count);
    read_scene_fields(sec, c.scene);
    sec.finish();
  }
  if (const json* s = root.sub("scal")) read_scal(*s, "scal", c.model.scal);
  if (const json* p = root.sub("paths")) {
    Section sec(*p, "paths");
    sec.read("data_dir", c.paths.data_dir);
    sec.read("out_dir", c.paths.out_dir);
    sec.finish();
  }
  root.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

std::string dump_run_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace salign
