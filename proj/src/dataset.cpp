#include "salign/dataset.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "salign/config.hpp"
#include "salign/errors.hpp"
#include "salign/image_io.hpp"

namespace salign::data {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kManifestName = "manifest.json";

bool directory_has_entries(const fs::path& dir) {
  return fs::exists(dir) && fs::is_directory(dir) && fs::directory_iterator(dir) != fs::directory_iterator();
}

Tensor load_plane(const fs::path& path, int channels, std::int64_t size) {
  const io::Image img = io::read_image(path);
  if (img.channels != channels || img.height != size || img.width != size) {
    throw DimensionError(path.string() + ": expected " + std::to_string(channels) + " channel(s) at " +
                         std::to_string(size) + "x" + std::to_string(size) + ", found " +
                         std::to_string(img.channels) + " at " + std::to_string(img.width) + "x" +
                         std::to_string(img.height));
  }
  return io::to_tensor(img);
}

}  // namespace

std::string sample_id(std::int64_t index, std::int64_t count) {
  const int width = std::max<int>(4, static_cast<int>(std::to_string(std::max<std::int64_t>(count - 1, 0)).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*lld", width, static_cast<long long>(index));
  return buf;
}

Manifest write_dataset(const fs::path& dir, const synth::SceneSpec& spec, std::int64_t count, bool force) {
  spec.validate();
  if (count < 0) throw ConfigError("dataset count must be >= 0");
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
  if (directory_has_entries(dir)) {
    if (!force) throw ConfigError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
    for (const char* sub : {"rgb", "thermal", "gt"}) fs::remove_all(dir / sub);
    fs::remove(dir / kManifestName);
  }
  for (const char* sub : {"rgb", "thermal", "gt"}) fs::create_directories(dir / sub);

  Manifest manifest;
  manifest.size = spec.size;
  manifest.spec = spec;
  ordered_json samples = ordered_json::array();
  for (std::int64_t i = 0; i < count; ++i) {
    const synth::SamplePair pair = synth::gen_scene(spec, static_cast<std::uint64_t>(i));
    ManifestEntry e;
    e.id = sample_id(i, count);
    e.rgb = "rgb/" + e.id + ".ppm";
    e.thermal = "thermal/" + e.id + ".ppm";
    e.gt = "gt/" + e.id + ".pgm";
    e.true_affine = pair.true_affine;
    io::write_image(dir / e.rgb, io::from_tensor(pair.rgb));
    io::write_image(dir / e.thermal, io::from_tensor(pair.thermal));
    io::write_image(dir / e.gt, io::from_tensor(pair.gt));
    samples.push_back({{"id", e.id},
                       {"rgb", e.rgb},
                       {"thermal", e.thermal},
                       {"gt", e.gt},
                       {"true_affine", e.true_affine.coeffs},
                       {"objects", pair.objects}});
    manifest.samples.push_back(std::move(e));
  }
  ordered_json j;
  j["size"] = spec.size;
  j["count"] = count;
  j["seed"] = spec.seed;
  j["spec"] = to_json(spec);
  j["samples"] = std::move(samples);
  io::write_text_atomic(dir / kManifestName, j.dump(2) + "\n");
  return manifest;
}

Manifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset manifest not found: " + path.string());
  Manifest m;
  try {
    const json j = json::parse(in);
    m.size = j.at("size").get<std::int64_t>();
    m.spec = scene_spec_from_json(j.at("spec"));
    const auto count = j.at("count").get<std::int64_t>();
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.rgb = s.at("rgb").get<std::string>();
      e.thermal = s.at("thermal").get<std::string>();
      e.gt = s.at("gt").get<std::string>();
      e.true_affine.coeffs = s.at("true_affine").get<std::array<double, 6>>();
      m.samples.push_back(std::move(e));
    }
    if (count != static_cast<std::int64_t>(m.samples.size())) {
      throw ConfigError(path.string() + ": count " + std::to_string(count) + " but " +
                        std::to_string(m.samples.size()) + " samples listed");
    }
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (m.size != m.spec.size) throw ConfigError(path.string() + ": size disagrees with spec.size");
  return m;
}

LoadResult load_dataset(const fs::path& dir) {
  LoadResult r;
  r.manifest = read_manifest(dir);
  for (const ManifestEntry& e : r.manifest.samples) {
    try {
      Sample s;
      s.id = e.id;
      s.rgb = load_plane(dir / e.rgb, 3, r.manifest.size);
      s.thermal = load_plane(dir / e.thermal, 3, r.manifest.size);
      s.gt = load_plane(dir / e.gt, 1, r.manifest.size);
      for (double& v : s.gt.mutable_data()) v = v > 0.5 ? 1.0 : 0.0;
      r.samples.push_back(std::move(s));
    } catch (const std::exception& ex) {
      r.errors.push_back(e.id + ": " + ex.what());
    }
  }
  return r;
}

}  // namespace salign::data
