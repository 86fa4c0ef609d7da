// Python bindings for the core pipeline: artifact synthesis, the reference
// watermarker, preference-model training, and the gradient attacks.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wmforge/attack.hpp"
#include "wmforge/checkpoint.hpp"
#include "wmforge/dataset.hpp"
#include "wmforge/evalkit.hpp"
#include "wmforge/prefnet.hpp"
#include "wmforge/refwm.hpp"
#include "wmforge/spectra.hpp"

#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace wmforge;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image image_from_array(const FloatArray& arr) {
    py::buffer_info info = arr.request();
    if (info.ndim != 3) throw std::invalid_argument("expected an H x W x C float array");
    Image img(int(info.shape[0]), int(info.shape[1]), int(info.shape[2]));
    std::memcpy(img.px.data(), info.ptr, img.px.size() * sizeof(float));
    return img;
}

py::array_t<float> array_from_image(const Image& img) {
    py::array_t<float> arr({img.h, img.w, img.c});
    std::memcpy(arr.mutable_data(), img.px.data(), img.px.size() * sizeof(float));
    return arr;
}

WatermarkKey key_from_kwargs(std::uint64_t seed, int bits, int grid, double alpha,
                             bool content_aware) {
    return make_key(seed, bits, grid, alpha, content_aware);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "watermark forging toolkit core";

    m.def("gen_clean",
          [](std::uint64_t seed, std::uint64_t image_id, int size) {
              return array_from_image(gen_clean(seed, image_id, size));
          },
          py::arg("seed"), py::arg("image_id"), py::arg("size") = 128,
          "Deterministic synthetic clean image as an HxWx3 float32 array in [0,1].");

    m.def("apply_artifact",
          [](const FloatArray& x, const std::string& style, bool gray, bool jnd_mask,
             std::uint64_t seed) {
              ArtifactParams p;
              p.style = artifact_style_from(style);
              p.gray = gray;
              p.jnd_mask = jnd_mask;
              Rng rng({seed, 0x617274ull});
              ArtifactResult r = apply_artifact(image_from_array(x), p, rng);
              return py::make_tuple(array_from_image(r.corrupted), array_from_image(r.omega));
          },
          py::arg("x"), py::arg("style"), py::arg("gray") = false, py::arg("jnd_mask") = false,
          py::arg("seed") = 0,
          "Corrupt an image with a synthetic frequency-domain artifact; returns "
          "(corrupted, residual).");

    m.def("jnd_map",
          [](const FloatArray& x) {
              Image img = image_from_array(x);
              std::vector<float> mask = jnd_map(img);
              py::array_t<float> arr({img.h, img.w});
              std::memcpy(arr.mutable_data(), mask.data(), mask.size() * sizeof(float));
              return arr;
          },
          py::arg("x"), "Perceptual masking map in [0,1], one value per pixel.");

    m.def("embed",
          [](const FloatArray& x, const std::string& message_hex, std::uint64_t key_seed,
             int bits, int grid, double alpha, bool content_aware) {
              WatermarkKey key = key_from_kwargs(key_seed, bits, grid, alpha, content_aware);
              BitMessage msg = message_from_hex(message_hex, bits);
              return array_from_image(embed(image_from_array(x), msg, key));
          },
          py::arg("x"), py::arg("message_hex"), py::arg("key_seed"), py::arg("bits") = 32,
          py::arg("grid") = 128, py::arg("alpha") = 0.02, py::arg("content_aware") = false,
          "Embed a hex message with the reference spread-spectrum watermarker.");

    m.def("decode",
          [](const FloatArray& x, std::uint64_t key_seed, int bits, int grid, double alpha,
             bool content_aware) {
              WatermarkKey key = key_from_kwargs(key_seed, bits, grid, alpha, content_aware);
              DecodeResult r = decode(image_from_array(x), key);
              return py::make_tuple(message_to_hex(r.bits), r.correlations);
          },
          py::arg("x"), py::arg("key_seed"), py::arg("bits") = 32, py::arg("grid") = 128,
          py::arg("alpha") = 0.02, py::arg("content_aware") = false,
          "Blind-decode a message; returns (message_hex, per-bit correlations).");

    py::class_<PrefModel>(m, "Model")
        .def_property_readonly("width", [](const PrefModel& mm) { return mm.width; })
        .def_property_readonly("depth", [](const PrefModel& mm) { return mm.depth; })
        .def("save", &save_model, py::arg("path"))
        .def("score",
             [](const PrefModel& mm, const FloatArray& x) {
                 return score_image(mm, image_from_array(x));
             },
             py::arg("x"), "Preference score of a single image.");

    m.def("load_model", &load_model, py::arg("path"));
    m.def("init_model", &init_model, py::arg("width") = 32, py::arg("depth") = 4,
          py::arg("seed") = 0);

    m.def("train",
          [](const std::vector<FloatArray>& images, int steps, int batch, double lr, int crop,
             int resize, const std::string& loss, std::uint64_t seed, int width, int depth,
             int adv_period, int log_every) {
              TrainConfig cfg;
              cfg.steps = steps;
              cfg.batch = batch;
              cfg.lr = lr;
              cfg.crop = crop;
              cfg.resize = resize;
              cfg.loss = loss_kind_from(loss);
              cfg.seed = seed;
              cfg.width = width;
              cfg.depth = depth;
              cfg.adv_period = adv_period;
              cfg.log_every = log_every;
              std::vector<Image> ds;
              ds.reserve(images.size());
              for (const auto& arr : images) ds.push_back(image_from_array(arr));
              TrainResult r = train(ds, cfg);
              py::list trace;
              for (const auto& row : r.trace)
                  trace.append(py::make_tuple(row.step, row.loss, row.rank_acc));
              return py::make_tuple(std::move(r.model), trace);
          },
          py::arg("images"), py::arg("steps") = 2000, py::arg("batch") = 8,
          py::arg("lr") = 1e-5, py::arg("crop") = 64, py::arg("resize") = 128,
          py::arg("loss") = "ranking", py::arg("seed") = 0, py::arg("width") = 32,
          py::arg("depth") = 4, py::arg("adv_period") = 2, py::arg("log_every") = 100,
          "Train a preference model; returns (model, [(step, loss, rank_acc), ...]).");

    m.def("extract",
          [](const PrefModel& mm, const FloatArray& xw, int k, double lr, int working) {
              AttackConfig cfg;
              cfg.k = k;
              cfg.lr = lr;
              cfg.working = working;
              return array_from_image(extract_multires(mm, image_from_array(xw), cfg));
          },
          py::arg("model"), py::arg("xw"), py::arg("k") = 500, py::arg("lr") = 0.05,
          py::arg("working") = 128,
          "Estimate the watermark residual of an image by score ascent.");

    m.def("remove",
          [](const PrefModel& mm, const FloatArray& xw, int k, double lr, int working) {
              AttackConfig cfg;
              cfg.k = k;
              cfg.lr = lr;
              cfg.working = working;
              return array_from_image(remove_watermark(mm, image_from_array(xw), cfg));
          },
          py::arg("model"), py::arg("xw"), py::arg("k") = 500, py::arg("lr") = 0.05,
          py::arg("working") = 128, "Strip the estimated watermark from an image.");

    m.def("forge",
          [](const PrefModel& mm, const FloatArray& xw, const FloatArray& y, int k, double lr,
             int working) {
              AttackConfig cfg;
              cfg.k = k;
              cfg.lr = lr;
              cfg.working = working;
              return array_from_image(forge(mm, image_from_array(xw), image_from_array(y), cfg));
          },
          py::arg("model"), py::arg("xw"), py::arg("y"), py::arg("k") = 500,
          py::arg("lr") = 0.05, py::arg("working") = 128,
          "Transplant the residual extracted from xw onto target y.");

    m.def("psnr",
          [](const FloatArray& a, const FloatArray& b) {
              return psnr(image_from_array(a), image_from_array(b));
          },
          py::arg("a"), py::arg("b"));

    m.def("bit_accuracy",
          [](const std::string& a_hex, const std::string& b_hex, int bits) {
              return bit_accuracy(message_from_hex(a_hex, bits), message_from_hex(b_hex, bits));
          },
          py::arg("a_hex"), py::arg("b_hex"), py::arg("bits") = 32);

    m.def("binomial_fpr", &binomial_fpr, py::arg("tau"), py::arg("bits"),
          "Exact false-positive rate of a tau-of-L matching detector.");
}
