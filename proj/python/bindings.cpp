// Python bindings: colorimetry, PSNR, training, colorization, evaluation and
// study reporting. Images cross the boundary as H×W×3 uint8 numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "chroma/colorspace.hpp"
#include "chroma/data.hpp"
#include "chroma/error.hpp"
#include "chroma/eval.hpp"
#include "chroma/image_io.hpp"
#include "chroma/inference.hpp"
#include "chroma/study.hpp"
#include "chroma/toy_corpus.hpp"
#include "chroma/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace chroma;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

RgbImage to_rgb(const U8Array& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3) throw ShapeError("expected an H×W×3 uint8 array");
    RgbImage img;
    img.height = static_cast<int>(arr.shape(0));
    img.width = static_cast<int>(arr.shape(1));
    img.data.assign(arr.data(), arr.data() + arr.size());
    return img;
}

U8Array from_rgb(const RgbImage& img) {
    U8Array out({img.height, img.width, 3});
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
}

// H×W×3 float64 (L, a, b) <-> planar LabImage.
LabImage to_lab(const F64Array& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3) throw ShapeError("expected an H×W×3 float array");
    LabImage lab(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    const double* p = arr.data();
    for (std::size_t i = 0; i < lab.pixel_count(); ++i) {
        lab.L[i] = p[3 * i];
        lab.a[i] = p[3 * i + 1];
        lab.b[i] = p[3 * i + 2];
    }
    return lab;
}

F64Array from_lab(const LabImage& lab) {
    F64Array out({lab.height, lab.width, 3});
    double* p = out.mutable_data();
    for (std::size_t i = 0; i < lab.pixel_count(); ++i) {
        p[3 * i] = lab.L[i];
        p[3 * i + 1] = lab.a[i];
        p[3 * i + 2] = lab.b[i];
    }
    return out;
}

py::dict report_dict(const EvalReport& r) {
    py::list images, failures;
    for (const auto& s : r.images) {
        images.append(py::dict(py::arg("source_id") = s.source_id, py::arg("psnr") = s.psnr,
                               py::arg("baseline_psnr") = s.baseline_psnr));
    }
    for (const auto& f : r.failures) {
        failures.append(py::dict(py::arg("source_id") = f.source_id, py::arg("message") = f.message));
    }
    return py::dict(py::arg("mean_psnr") = r.mean_psnr, py::arg("baseline_mean_psnr") = r.baseline_mean_psnr,
                    py::arg("images") = images, py::arg("failures") = failures);
}

}  // namespace

PYBIND11_MODULE(_chroma, m) {
    m.doc() = "Adversarial colorization: colorimetry, training, evaluation, study reports";

    auto base = py::register_exception<Error>(m, "ChromaError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<CheckpointError>(m, "CheckpointError", base.ptr());
    py::register_exception<IngestionError>(m, "IngestionError", base.ptr());
    py::register_exception<StatisticError>(m, "StatisticError", base.ptr());
    py::register_exception<TrainingError>(m, "TrainingError", base.ptr());

    m.def("rgb_to_lab", [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const Lab lab = rgb_to_lab(Rgb8{r, g, b});
        return py::make_tuple(lab.L, lab.a, lab.b);
    }, py::arg("r"), py::arg("g"), py::arg("b"));
    m.def("lab_to_rgb", [](double L, double a, double b) {
        const Rgb8 c = lab_to_rgb(Lab{L, a, b});
        return py::make_tuple(c[0], c[1], c[2]);
    }, py::arg("L"), py::arg("a"), py::arg("b"));
    m.def("image_to_lab", [](const U8Array& img) { return from_lab(rgb_to_lab(to_rgb(img))); }, py::arg("image"));
    m.def("lab_to_image", [](const F64Array& lab) { return from_rgb(lab_to_rgb(to_lab(lab))); }, py::arg("lab"));
    m.def("to_grayscale", [](const U8Array& img) { return from_rgb(to_grayscale(to_rgb(img))); }, py::arg("image"));
    m.def("psnr_ab", [](const F64Array& pred, const F64Array& truth) { return psnr_ab(to_lab(pred), to_lab(truth)); },
          py::arg("pred"), py::arg("truth"), "Chroma PSNR in dB between two H×W×3 Lab arrays; 99 when identical.");

    m.def("read_image", [](const fs::path& p) { return from_rgb(read_image(p)); }, py::arg("path"));
    m.def("write_image", [](const fs::path& p, const U8Array& img) { write_image(p, to_rgb(img)); }, py::arg("path"),
          py::arg("image"));
    m.def("write_toy_corpus", &write_toy_corpus, py::arg("dir"), py::arg("count") = 32, py::arg("side") = 64,
          py::arg("seed") = 2024);

    m.def("desk_config", [] { return TrainConfig::desk_profile().to_text(); },
          "Desk-scale training config as `key = value` text.");
    m.def("reference_config", [] { return TrainConfig::reference_profile().to_text(); },
          "Full-scale training config as `key = value` text.");

    m.def("train", [](const std::string& config_text, const fs::path& corpus, const fs::path& out_dir,
                      std::optional<fs::path> resume_from) {
        const TrainConfig cfg = TrainConfig::from_text(config_text);
        const Corpus c = Corpus::open(corpus);
        FitResult r;
        {
            py::gil_scoped_release release;
            r = fit(cfg, c, FitOptions{out_dir, resume_from, {}});
        }
        return py::dict(py::arg("checkpoint") = r.checkpoint, py::arg("metrics_log") = r.metrics_log,
                        py::arg("steps") = r.state.step);
    }, py::arg("config"), py::arg("corpus"), py::arg("out_dir"), py::arg("resume_from") = py::none(),
       "Runs training and returns the checkpoint path, metrics log path and step count.");

    py::class_<Colorizer>(m, "Colorizer")
        .def_static("from_checkpoint", &Colorizer::from_checkpoint, py::arg("checkpoint"))
        .def_property_readonly("side", &Colorizer::side)
        .def("colorize", [](Colorizer& c, const U8Array& img) {
            const RgbImage in = to_rgb(img);
            RgbImage out;
            {
                py::gil_scoped_release release;
                out = c.colorize(in);
            }
            return from_rgb(out);
        }, py::arg("image"))
        .def("predict", [](Colorizer& c, const U8Array& img) { return from_lab(c.predict(to_rgb(img))); },
             py::arg("image"))
        .def("evaluate", [](Colorizer& c, const fs::path& corpus) {
            const Corpus k = Corpus::open(corpus);
            EvalReport r;
            {
                py::gil_scoped_release release;
                r = evaluate_model(c, k);
            }
            return report_dict(r);
        }, py::arg("corpus"));

    m.def("study_results", [](const fs::path& pool_manifest, const fs::path& store) {
        return study::session_results(study::StudyPool::load(pool_manifest), study::JudgmentStore::read(store)).to_json();
    }, py::arg("pool_manifest"), py::arg("store"), "Naturalness table as JSON text.");
}
