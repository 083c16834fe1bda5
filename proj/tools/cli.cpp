#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "salign/checkpoint.hpp"
#include "salign/config.hpp"
#include "salign/dataset.hpp"
#include "salign/errors.hpp"
#include "salign/flop_model.hpp"
#include "salign/image_io.hpp"
#include "salign/metrics.hpp"
#include "salign/train.hpp"
#include "salign/verify.hpp"

namespace salign::cli {
namespace fs = std::filesystem;

namespace {

std::string printf_string(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool print_config = false;
  bool no_scal = false;
  bool no_saf = false;

  std::string data_dir;
  std::string out_dir;
  std::optional<std::int64_t> count;
  bool force = false;
  std::optional<std::int64_t> epochs;
  std::string checkpoint;
  std::string level = "all";
  std::int64_t batch = 1;
  std::int64_t channels = 64;
};

RunConfig resolve(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (o.seed) {
    c.train.seed = *o.seed;
    c.scene.seed = *o.seed;
  }
  if (o.no_scal) c.model.use_scal = false;
  if (o.no_saf) c.model.use_saf = false;
  if (o.count) c.scene_count = *o.count;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (!o.data_dir.empty()) c.paths.data_dir = o.data_dir;
  if (!o.out_dir.empty()) c.paths.out_dir = o.out_dir;
  c.validate();
  return c;
}

int report_load_errors(const data::LoadResult& loaded, std::ostream& err) {
  for (const auto& e : loaded.errors) err << "error: " << e << "\n";
  return loaded.errors.empty() ? kSuccess : kUsageError;
}

// --- gen ---------------------------------------------------------------------

int cmd_gen(const RunConfig& c, const Options& o, std::ostream& out) {
  const auto m = data::write_dataset(c.paths.data_dir, c.scene, c.scene_count, o.force);
  out << "wrote " << m.samples.size() << " samples (" << c.scene.size << "x" << c.scene.size << ", seed "
      << c.scene.seed << ") to " << c.paths.data_dir << "\n";
  return kSuccess;
}

// --- train -------------------------------------------------------------------

int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto loaded = data::load_dataset(c.paths.data_dir);
  if (const int code = report_load_errors(loaded, err); code != kSuccess) return code;
  if (loaded.manifest.size != c.model.input_size) {
    throw DimensionError("dataset images are " + std::to_string(loaded.manifest.size) + "x" +
                         std::to_string(loaded.manifest.size) + " but model.input_size is " +
                         std::to_string(c.model.input_size));
  }
  const fs::path dir = c.paths.out_dir;
  fs::create_directories(dir);
  io::write_text_atomic(dir / "config.json", dump_run_config(c));

  const Model model(c.model, c.train.seed);
  train::Adam adam(model.parameters(), train::adam_options(c.train));
  std::string log = train::log_header();
  io::write_text_atomic(dir / "train_log.csv", log);

  train::Hooks hooks;
  hooks.on_epoch = [&](const train::EpochRecord& r) {
    log += train::log_row(r);
    io::write_text_atomic(dir / "train_log.csv", log);
    out << train::log_row(r) << std::flush;
  };
  hooks.on_best = [&](const train::EpochRecord& r, const Model& m, const train::Adam& a) {
    ckpt::save(dir / "best.ckpt", train::make_checkpoint(m, &a, r.epoch));
  };
  out << log;
  const auto result = train::fit(model, adam, loaded.samples, c.train, hooks);
  if (!result.log.empty() && !std::isfinite(result.log.back().loss.total)) {
    err << "error: final loss is not finite\n";
    return kNumericalAbort;
  }
  ckpt::save(dir / "final.ckpt", train::make_checkpoint(model, &adam, c.train.epochs));
  if (result.log.empty()) ckpt::save(dir / "best.ckpt", train::make_checkpoint(model, &adam, 0));
  out << "checkpoints in " << dir.string() << " (best epoch " << result.best_epoch << ")\n";
  return kSuccess;
}

// --- eval --------------------------------------------------------------------

int cmd_eval(const RunConfig& c, const Options& o, std::ostream& out, std::ostream& err) {
  if (o.checkpoint.empty()) throw ConfigError("eval needs --ckpt");
  const Model model = train::model_from_checkpoint(ckpt::load(o.checkpoint));
  const auto loaded = data::load_dataset(c.paths.data_dir);
  const fs::path dir = o.out_dir.empty() ? fs::path(c.paths.out_dir) / "eval" : fs::path(o.out_dir);
  fs::create_directories(dir / "maps");

  metrics::Aggregator agg;
  std::string per_sample = "id,mae,f_beta_max,f_beta_mean,degenerate\n";
  for (const auto& s : loaded.samples) {
    if (s.rgb.shape().h != model.config().input_size || s.rgb.shape().w != model.config().input_size) {
      throw DimensionError("sample " + s.id + " is " + std::to_string(s.rgb.shape().h) + "x" +
                           std::to_string(s.rgb.shape().w) + " but the checkpoint expects " +
                           std::to_string(model.config().input_size) + "x" +
                           std::to_string(model.config().input_size));
    }
    const Tensor pred = train::predict(model, s);
    io::write_image(dir / "maps" / (s.id + ".pgm"), io::from_tensor(pred));
    const auto r = metrics::pr_f(pred.data(), s.gt.data());
    agg.add(r);
    per_sample += printf_string("%s,%.6f,%.6f,%.6f,%d\n", s.id.c_str(), r.mae, r.f_beta_max, r.f_beta_mean,
                                r.degenerate ? 1 : 0);
  }
  const auto report = agg.result();
  io::write_text_atomic(dir / "per_sample.csv", per_sample);
  io::write_text_atomic(dir / "summary.csv", metrics::summary_csv(report));
  io::write_text_atomic(dir / "curve.csv", metrics::curve_csv(report));
  out << metrics::summary_csv(report);
  out << "reports and maps in " << dir.string() << "\n";
  return report_load_errors(loaded, err);
}

// --- verify ------------------------------------------------------------------

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  const auto checks = verify::run(o.level);
  for (const auto& c : checks) out << verify::format(c) << "\n";
  int failed = 0;
  for (const auto& c : checks) {
    if (!c.passed()) {
      err << "failed: " << c.suite << "/" << c.name << "\n";
      ++failed;
    }
  }
  out << (checks.size() - failed) << "/" << checks.size() << " checks passed\n";
  return failed == 0 ? kSuccess : kVerificationFailed;
}

// --- flops -------------------------------------------------------------------

int cmd_flops(const RunConfig& c, const Options& o, std::ostream& out) {
  const auto blocks = flops::model_forward(c.model, o.batch);
  out << printf_string("forward pass, %lldx%lld input, batch %lld\n", static_cast<long long>(c.model.input_size),
                       static_cast<long long>(c.model.input_size), static_cast<long long>(o.batch));
  for (const auto& b : blocks) out << printf_string("  %-28s %14lld\n", b.name.c_str(), static_cast<long long>(b.flops));
  const std::int64_t analytic = flops::total(blocks);
  out << printf_string("  %-28s %14lld\n", "total", static_cast<long long>(analytic));

  const std::int64_t counted = flops::instrumented_forward(c.model, o.batch, c.train.seed);
  const double rel = std::abs(static_cast<double>(counted - analytic)) / static_cast<double>(analytic);
  out << printf_string("instrumented count %lld, relative difference %.3e\n", static_cast<long long>(counted), rel);

  const std::vector<std::int64_t> sides{32, 64, 128, 256};
  const auto rows = flops::scaling_table(sides, o.channels, c.model.filters);
  out << printf_string("\nmixer scaling, %lld channels, %lld filters\n", static_cast<long long>(o.channels),
                       static_cast<long long>(c.model.filters));
  out << printf_string("  %6s %14s %14s %18s %9s %9s\n", "side", "egf", "fft", "attention", "egf x", "attn x");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::string egf_ratio = "-", attn_ratio = "-";
    if (i > 0) {
      egf_ratio = printf_string("%.4f", static_cast<double>(r.egf.total()) / static_cast<double>(rows[i - 1].egf.total()));
      attn_ratio =
          printf_string("%.4f", static_cast<double>(r.attention) / static_cast<double>(rows[i - 1].attention));
    }
    out << printf_string("  %6lld %14lld %14lld %18lld %9s %9s\n", static_cast<long long>(r.side),
                         static_cast<long long>(r.egf.total()), static_cast<long long>(r.egf.fft),
                         static_cast<long long>(r.attention), egf_ratio.c_str(), attn_ratio.c_str());
  }

  const std::int64_t side = c.model.input_size / 4;
  const auto n1 = flops::egf_mixer(1, o.channels, side, side, c.model.filters);
  const auto n2 = flops::egf_mixer(1, o.channels, side, side, 2 * c.model.filters);
  out << printf_string("\nfilter count at %lldx%lld: N=%lld fft %lld synthesis %lld; N=%lld fft %lld synthesis %lld\n",
                       static_cast<long long>(side), static_cast<long long>(side),
                       static_cast<long long>(c.model.filters), static_cast<long long>(n1.fft),
                       static_cast<long long>(n1.synthesis), static_cast<long long>(2 * c.model.filters),
                       static_cast<long long>(n2.fft), static_cast<long long>(n2.synthesis));
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Unaligned RGB-thermal saliency: data, training, evaluation and verification", "salign"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  app.add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "overrides train.seed and scene.seed");
  app.add_flag("--print-config", o.print_config, "print the resolved configuration and exit");
  app.add_flag("--no-scal", o.no_scal, "disable the alignment loss");
  app.add_flag("--no-saf", o.no_saf, "replace fusion blocks by element-wise addition");

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--out", o.data_dir, "dataset directory (default paths.data_dir)");
  gen->add_option("--count", o.count, "number of pairs (default scene.count)");
  gen->add_flag("--force", o.force, "replace an existing dataset layout");

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--data", o.data_dir, "dataset directory");
  tr->add_option("--out", o.out_dir, "output directory for logs and checkpoints");
  tr->add_option("--epochs", o.epochs, "overrides train.epochs");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--ckpt", o.checkpoint, "checkpoint file")->required();
  ev->add_option("--data", o.data_dir, "dataset directory");
  ev->add_option("--out", o.out_dir, "report directory (default <paths.out_dir>/eval)");

  auto* ver = app.add_subcommand("verify", "run oracle checks");
  ver->add_option("level", o.level, "fft, egf, scal, grad or all")
      ->check(CLI::IsMember({"fft", "egf", "scal", "grad", "all"}));

  auto* fl = app.add_subcommand("flops", "operation counts");
  fl->add_option("--batch", o.batch, "batch size for the forward count")->check(CLI::PositiveNumber);
  fl->add_option("--channels", o.channels, "width for the scaling table")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kUsageError;
  }

  try {
    const RunConfig config = resolve(o);
    if (o.print_config) {
      out << dump_run_config(config);
      return kSuccess;
    }
    if (*gen) return cmd_gen(config, o, out);
    if (*tr) return cmd_train(config, out, err);
    if (*ev) return cmd_eval(config, o, out, err);
    if (*ver) return cmd_verify(o, out, err);
    if (*fl) return cmd_flops(config, o, out);
    out << app.help();
    return kUsageError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumericalAbort;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
}

}  // namespace salign::cli
