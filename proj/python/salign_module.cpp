#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "salign/checkpoint.hpp"
#include "salign/fourier.hpp"
#include "salign/flop_model.hpp"
#include "salign/metrics.hpp"
#include "salign/scal.hpp"
#include "salign/synthdata.hpp"
#include "salign/train.hpp"
#include "salign/verify.hpp"

namespace py = pybind11;
using namespace salign;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Accepts 2-D (H, W), 3-D (C, H, W) or 4-D (N, C, H, W) arrays.
Tensor to_tensor(const Array& a) {
  std::array<std::int64_t, 4> dims{1, 1, 1, 1};
  const auto nd = a.ndim();
  if (nd < 2 || nd > 4) throw py::value_error("expected a 2-D, 3-D or 4-D array");
  for (py::ssize_t i = 0; i < nd; ++i) dims[static_cast<std::size_t>(4 - nd + i)] = a.shape(i);
  return Tensor::from({dims[0], dims[1], dims[2], dims[3]}, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  const Shape s = t.shape();
  Array out({s.n, s.c, s.h, s.w});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::dict report_dict(const metrics::EvalReport& r) {
  py::dict d;
  d["mae"] = r.mae;
  d["f_beta_max"] = r.f_beta_max;
  d["f_beta_mean"] = r.f_beta_mean;
  d["precision"] = std::vector<double>(r.curve.precision.begin(), r.curve.precision.end());
  d["recall"] = std::vector<double>(r.curve.recall.begin(), r.curve.recall.end());
  d["f_beta"] = std::vector<double>(r.curve.f_beta.begin(), r.curve.f_beta.end());
  d["degenerate"] = r.degenerate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_salign, m) {
  m.doc() = "Bindings for the salign C++ core";

  m.def(
      "rfft2",
      [](const Array& x) {
        const auto s = fourier::rfft2(to_tensor(x));
        const Shape sh = s.spectral_shape();
        py::array_t<std::complex<double>> out({sh.n, sh.c, sh.h, sh.w});
        auto* dst = out.mutable_data();
        for (std::int64_t n = 0; n < sh.n; ++n)
          for (std::int64_t c = 0; c < sh.c; ++c)
            for (std::int64_t h = 0; h < sh.h; ++h)
              for (std::int64_t k = 0; k < sh.w; ++k) *dst++ = s.bin(n, c, h, k);
        return out;
      },
      py::arg("x"), "Half spectrum (N, C, H, W/2+1) of a real map.");

  m.def(
      "round_trip",
      [](const Array& x) { return to_array(fourier::irfft2(fourier::rfft2(to_tensor(x)))); }, py::arg("x"));

  m.def(
      "scal_loss",
      [](const Array& rgb, const Array& thermal, int k, double t) {
        scal::ScalConfig cfg;
        cfg.k = k;
        cfg.t = t;
        cfg.validate();
        return scal::scal_loss({to_tensor(rgb), to_tensor(thermal)}, cfg).item();
      },
      py::arg("rgb"), py::arg("thermal"), py::arg("k") = 3, py::arg("t") = 0.4,
      "Windowed contrastive alignment loss of two compressed feature maps.");

  m.def(
      "gen_scene",
      [](std::int64_t size, std::uint64_t seed, std::uint64_t index, double max_translation) {
        synth::SceneSpec spec;
        spec.size = size;
        spec.seed = seed;
        spec.max_translation = max_translation;
        spec.validate();
        const auto p = synth::gen_scene(spec, index);
        py::dict d;
        d["rgb"] = to_array(p.rgb);
        d["thermal"] = to_array(p.thermal);
        d["gt"] = to_array(p.gt);
        d["affine"] = std::vector<double>(p.true_affine.coeffs.begin(), p.true_affine.coeffs.end());
        d["objects"] = p.objects;
        return d;
      },
      py::arg("size") = 128, py::arg("seed") = 0, py::arg("index") = 0, py::arg("max_translation") = 6.0);

  m.def(
      "evaluate",
      [](const Array& saliency, const Array& gt) {
        const Tensor s = to_tensor(saliency), g = to_tensor(gt);
        return report_dict(metrics::pr_f(s.data(), g.data()));
      },
      py::arg("saliency"), py::arg("gt"), "MAE, F-beta and the PR curve of one map.");

  m.def(
      "predict",
      [](const std::filesystem::path& checkpoint, const Array& rgb, const Array& thermal) {
        const Model model = train::model_from_checkpoint(ckpt::load(checkpoint));
        data::Sample s{"py", to_tensor(rgb), to_tensor(thermal), {}};
        return to_array(train::predict(model, s));
      },
      py::arg("checkpoint"), py::arg("rgb"), py::arg("thermal"));

  m.def(
      "egf_scaling",
      [](std::vector<std::int64_t> sides, std::int64_t channels, std::int64_t filters) {
        py::list rows;
        for (const auto& r : flops::scaling_table(sides, channels, filters)) {
          py::dict d;
          d["side"] = r.side;
          d["egf"] = r.egf.total();
          d["fft"] = r.egf.fft;
          d["synthesis"] = r.egf.synthesis;
          d["attention"] = r.attention;
          rows.append(d);
        }
        return rows;
      },
      py::arg("sides"), py::arg("channels") = 64, py::arg("filters") = 4);

  m.def(
      "verify",
      [](const std::string& level) {
        py::list rows;
        for (const auto& c : verify::run(level)) {
          py::dict d;
          d["suite"] = c.suite;
          d["name"] = c.name;
          d["error"] = c.error;
          d["tolerance"] = c.tolerance;
          d["passed"] = c.passed();
          rows.append(d);
        }
        return rows;
      },
      py::arg("level") = "all");

  m.def(
      "main",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in-process; returns (exit code, stdout, stderr).");
}
