#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <random>

#include "cce/cascade.hpp"
#include "cce/checkpoint.hpp"
#include "cce/grad_suite.hpp"
#include "cce/metric.hpp"
#include "cce/synth.hpp"

namespace py = pybind11;
using namespace cce;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Array image_to_array(const Image& t) {
    Array out({t.channels(), t.height(), t.width()});
    std::memcpy(out.mutable_data(), t.storage().data(), t.size() * sizeof(double));
    return out;
}

Image array_to_image(const Array& a) {
    if (a.ndim() != 3) throw std::invalid_argument("image must have shape (channels, height, width)");
    Image t(Shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                  static_cast<std::size_t>(a.shape(2))});
    std::memcpy(t.storage().data(), a.data(), t.size() * sizeof(double));
    return t;
}

MaskArray mask_to_array(const Mask& m) {
    MaskArray out({m.height(), m.width()});
    std::memcpy(out.mutable_data(), m.bits().data(), m.size());
    return out;
}

Mask array_to_mask(const MaskArray& a) {
    if (a.ndim() != 2) throw std::invalid_argument("mask must have shape (height, width)");
    Mask m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    const auto* p = a.data();
    for (std::size_t y = 0; y < m.height(); ++y)
        for (std::size_t x = 0; x < m.width(); ++x) m.set(y, x, p[y * m.width() + x] != 0);
    return m;
}

LatentSet array_to_latents(const Array& a, const std::string& id) {
    if (a.ndim() != 2) throw std::invalid_argument("latents must have shape (n, D)");
    const auto n = static_cast<std::size_t>(a.shape(0)), d = static_cast<std::size_t>(a.shape(1));
    return LatentSet(id, d, std::vector<double>(a.data(), a.data() + n * d));
}

// Holder so the variant is exposed as one opaque class rather than converted.
struct PyModel {
    LoadedModel model;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Context encoder toolkit core: masks, the NSD metric and model inference";

    m.def("central_mask", [](std::size_t h, std::size_t w, double fraction) {
        return mask_to_array(central_mask(h, w, fraction));
    }, py::arg("height"), py::arg("width"), py::arg("fraction") = 0.25);

    m.def("random_blocks_mask",
          [](std::size_t h, std::size_t w, double max_coverage, std::size_t min_side, std::size_t max_side,
             std::uint64_t seed) {
              std::mt19937_64 rng(seed);
              return mask_to_array(random_blocks_mask(h, w, max_coverage, {min_side, max_side}, rng));
          },
          py::arg("height"), py::arg("width"), py::arg("max_coverage") = 0.25, py::arg("min_side") = 4,
          py::arg("max_side") = 12, py::arg("seed") = 0);

    m.def("coverage", [](const MaskArray& mask) { return coverage(array_to_mask(mask)); });

    m.def("apply_mask", [](const Array& image, const MaskArray& mask, std::vector<double> fill) {
        return image_to_array(apply_mask(array_to_image(image), array_to_mask(mask), fill));
    });

    m.def("pairwise_sq_distortion", [](const Array& latents) {
        return pairwise_sq_distortion(array_to_latents(latents, ""));
    }, "Pairwise mean squared distance over all ordered pairs of rows.");

    m.def("mean_sq_distortion", [](const Array& latents) {
        return mean_sq_distortion(array_to_latents(latents, ""));
    }, "Twice the mean squared deviation of the rows from their centroid.");

    m.def("nsd_estimate",
          [](const std::vector<Array>& per_image, unsigned threads) {
              std::vector<LatentSet> sets;
              std::size_t dim = 0;
              for (std::size_t j = 0; j < per_image.size(); ++j) {
                  sets.push_back(array_to_latents(per_image[j], "image_" + std::to_string(j)));
                  dim = sets.back().dim();
              }
              const auto r = nsd_estimate(sets, dim, threads);
              py::dict out;
              out["nsd_mean"] = r.nsd_mean;
              out["nsd_std"] = r.nsd_std;
              out["dataset_dist2"] = r.dataset_dist2;
              out["per_image_dist2"] = r.per_image_dist2;
              out["dim"] = r.dim;
              out["masks"] = r.masks;
              out["images"] = r.images;
              return out;
          },
          py::arg("per_image"), py::arg("threads") = 1);

    m.def("chi2_reference", [](std::size_t dim, std::size_t samples, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return chi2_reference(dim, samples, rng);
    }, py::arg("dim"), py::arg("samples"), py::arg("seed") = 0);

    m.def("synth_sample", [](std::size_t size, std::uint64_t seed, std::size_t index) {
        return image_to_array(synth_sample(size, seed, index).image);
    }, py::arg("size"), py::arg("seed"), py::arg("index"));

    m.def("downscale", [](const Array& image) { return image_to_array(downscale(array_to_image(image))); });
    m.def("upscale", [](const Array& image) { return image_to_array(upscale(array_to_image(image))); });

    py::class_<PyModel>(m, "Model")
        .def_property_readonly("latent_dim", [](const PyModel& p) { return latent_dim(p.model); })
        .def_property_readonly("is_cascade",
                               [](const PyModel& p) { return std::holds_alternative<CascadeModel>(p.model); })
        .def("encode",
             [](const PyModel& p, const Array& image, const MaskArray& mask) {
                 const Image im = array_to_image(image);
                 const Mask mk = array_to_mask(mask);
                 return std::visit([&](const auto& mdl) { return encode_latent(mdl, im, mk); }, p.model);
             })
        .def("inpaint", [](const PyModel& p, const Array& image, const MaskArray& mask) {
            const Image im = array_to_image(image);
            const Mask mk = array_to_mask(mask);
            return image_to_array(std::visit([&](const auto& mdl) { return inpaint(mdl, im, mk); }, p.model));
        });

    m.def("load_model", [](const std::filesystem::path& path) { return PyModel{load_model(path)}; });

    m.def("grad_check_suite", [](bool mutate) {
        GradSuiteOptions opts;
        opts.mutate = mutate;
        std::vector<std::pair<std::string, double>> out;
        for (const auto& e : run_grad_suite(opts)) out.emplace_back(e.component, e.report.max_relative_error);
        return out;
    }, py::arg("mutate") = false);
}
