#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "srn/cascade.hpp"
#include "srn/datakit.hpp"
#include "srn/error.hpp"
#include "srn/evalkit.hpp"
#include "srn/tracking.hpp"

namespace py = pybind11;
using namespace srn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (N, 2) array <-> FaceShape
FaceShape to_shape(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw InvalidInput("landmarks must have shape (N, 2)");
  return FaceShape::from_flat(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
}

Array from_shape(const FaceShape& s) {
  Array out({static_cast<py::ssize_t>(s.size()), py::ssize_t{2}});
  const auto flat = s.flat();
  std::copy(flat.begin(), flat.end(), out.mutable_data());
  return out;
}

// (H, W) or (H, W, C) array in [0, 1] <-> FaceImage
FaceImage to_image(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw InvalidInput("image must have shape (H, W) or (H, W, C)");
  const std::size_t c = a.ndim() == 3 ? static_cast<std::size_t>(a.shape(2)) : 1;
  return FaceImage(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)), c,
                   std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_image(const FaceImage& img) {
  std::vector<py::ssize_t> dims{static_cast<py::ssize_t>(img.height()), static_cast<py::ssize_t>(img.width())};
  if (img.channels() > 1) dims.push_back(static_cast<py::ssize_t>(img.channels()));
  Array out(dims);
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

NormalizationRule rule_of(const std::string& norm) { return NormalizationRule::parse(norm); }

}  // namespace

PYBIND11_MODULE(_srn, m) {
  m.doc() = "Structural relation network for facial landmarks";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<InvalidState>(m, "InvalidState", PyExc_RuntimeError);
  py::register_exception<DivergedTraining>(m, "DivergedTraining", PyExc_RuntimeError);

  m.def("parse_pts", [](const std::string& text) { return from_shape(parse_pts(text)); }, py::arg("text"));
  m.def("format_pts", [](const Array& pts) { return format_pts(to_shape(pts)); }, py::arg("landmarks"));
  m.def("read_png", [](const std::filesystem::path& p) { return from_image(read_png(p)); }, py::arg("path"));
  m.def("write_png", [](const std::filesystem::path& p, const Array& img) { write_png(p, to_image(img)); },
        py::arg("path"), py::arg("image"));

  m.def("partition_sizes", [](std::size_t n) {
    const GroupSchema s = partition(n);
    std::vector<std::size_t> sizes;
    for (auto g : kGroups) sizes.push_back(s.group(g).size());
    return sizes;
  }, py::arg("num_landmarks") = 68);

  m.def(
      "generate_synthetic",
      [](std::size_t count, std::uint64_t seed, std::size_t image_size, double face_scale) {
        SynthConfig cfg;
        cfg.count = count;
        cfg.seed = seed;
        cfg.image_size = image_size;
        cfg.face_scale = face_scale;
        py::list out;
        for (const auto& s : generate_synthetic(cfg)) out.append(py::make_tuple(from_image(s.image), from_shape(s.gt)));
        return out;
      },
      py::arg("count"), py::arg("seed") = 0, py::arg("image_size") = 80,
      py::arg("face_scale") = 22.0,
      "List of (image, landmarks) pairs rendered from the 68-point template.");

  m.def("nme", [](const Array& pred, const Array& gt, const std::string& norm) {
    return nme(to_shape(pred), to_shape(gt), rule_of(norm));
  }, py::arg("pred"), py::arg("gt"), py::arg("norm") = "interocular");
  m.def("ced", [](const std::vector<double>& errors, const std::vector<double>& thresholds) {
    std::vector<double> out;
    for (const auto& p : ced(errors, thresholds)) out.push_back(p.fraction);
    return out;
  }, py::arg("errors"), py::arg("thresholds"));
  m.def("failure_rate", [](const std::vector<double>& e, double t) { return failure_rate(e, t); },
        py::arg("errors"), py::arg("threshold") = 0.08);

  py::class_<SrnModel>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return SrnModel::from_checkpoint(load_checkpoint(p)); },
                  py::arg("path"))
      .def("save", [](const SrnModel& self, const std::filesystem::path& p) { save_checkpoint(self.to_checkpoint(), p); },
           py::arg("path"))
      .def_property_readonly("num_landmarks", [](const SrnModel& self) { return self.net.num_landmarks; })
      .def_property_readonly("video_mode", [](const SrnModel& self) { return self.mode == RnnMode::temporal; })
      .def_property_readonly("mean_shape", [](const SrnModel& self) { return from_shape(self.mean_shape); })
      .def(
          "predict",
          [](const SrnModel& self, const Array& image, std::optional<Array> init) {
            const FaceImage img = to_image(image);
            const auto traj = init ? predict(img, to_shape(*init), self) : predict(img, self);
            py::list shapes;
            for (const auto& s : traj.shapes) shapes.append(from_shape(s));
            return shapes;
          },
          py::arg("image"), py::arg("init") = py::none(), "Shapes L^0 .. L^I of the cascade.")
      .def("retask", [](const SrnModel& self) { return retask(self); })
      .def("track", [](const SrnModel& self, const std::vector<Array>& frames) {
        std::vector<FaceImage> imgs;
        for (const auto& f : frames) imgs.push_back(to_image(f));
        py::list shapes;
        for (const auto& s : track(imgs, self).shapes) shapes.append(from_shape(s));
        return shapes;
      }, py::arg("frames"));

  m.def(
      "train",
      [](const std::vector<std::pair<Array, Array>>& samples, const std::string& config_json) {
        std::vector<TrainSample> data;
        for (const auto& [img, gt] : samples) data.push_back({to_image(img), to_shape(gt)});
        const TrainConfig cfg = TrainConfig::from_json(nlohmann::json::parse(config_json));
        py::gil_scoped_release release;
        return SrnModel::from_checkpoint(train(data, cfg));
      },
      py::arg("samples"), py::arg("config_json") = "{}",
      "Trains an image-mode model; the config uses the CLI train JSON schema.");
}
