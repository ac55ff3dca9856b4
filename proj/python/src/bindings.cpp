// Python bindings. Poses cross the boundary as 6-sequences
// [rx, ry, rz, tx, ty, tz]; images as 2D float64 arrays indexed [row, column];
// volumes as 3D float32 arrays indexed [k, j, i]. Structured configs and
// reports cross as JSON text and are decoded on the Python side.

#include <memory>
#include <optional>
#include <string>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lrareg/drr.hpp"
#include "lrareg/errors.hpp"
#include "lrareg/evaluation.hpp"
#include "lrareg/registration.hpp"

namespace py = pybind11;
using namespace lrareg;

namespace {

using ImageArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using VolumeArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Pose6 to_pose(const std::array<double, 6>& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

DetectorImage to_image(const ImageArray& a, double spacing_mm = 1.0) {
  if (a.ndim() != 2) throw InvalidArgument("image must be a 2D array");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return DetectorImage(w, h, spacing_mm, std::vector<double>(a.data(), a.data() + a.size()));
}

ImageArray from_image(const DetectorImage& img) {
  ImageArray out({img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

Dims3 to_dims(const py::object& dims) {
  if (py::isinstance<py::int_>(dims)) {
    const int d = dims.cast<int>();
    return {d, d, d};
  }
  return dims.cast<Dims3>();
}

VolumeArray volume_array(const Volume& v) {
  const Dims3& d = v.dims();
  VolumeArray out({d[2], d[1], d[0]});
  std::copy(v.data().begin(), v.data().end(), out.mutable_data());
  return out;
}

Volume volume_from_array(const VolumeArray& a, double spacing_mm) {
  if (a.ndim() != 3) throw InvalidArgument("volume must be a 3D array");
  const Dims3 dims{static_cast<int>(a.shape(2)), static_cast<int>(a.shape(1)),
                   static_cast<int>(a.shape(0))};
  return Volume(dims, spacing_mm, std::vector<float>(a.data(), a.data() + a.size()));
}

SimilarityConfig similarity_config(const std::string& json_text) {
  return nlohmann::json::parse(json_text).get<SimilarityConfig>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "2D/3D registration engine";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<Volume, std::shared_ptr<Volume>>(m, "Volume")
      .def(py::init(&volume_from_array), py::arg("data"), py::arg("spacing_mm"))
      .def_property_readonly("dims", &Volume::dims)
      .def_property_readonly("spacing_mm", &Volume::spacing)
      .def("to_numpy", &volume_array)
      .def("__eq__", [](const Volume& a, const Volume& b) { return a == b; });

  py::class_<CameraGeometry>(m, "Camera")
      .def(py::init([](int width, int height, double spacing_mm, double sid_mm,
                       std::optional<double> siso_mm) {
             return siso_mm ? make_camera({width, height}, spacing_mm, sid_mm, *siso_mm)
                            : make_camera({width, height}, spacing_mm, sid_mm);
           }),
           py::arg("width"), py::arg("height"), py::arg("spacing_mm"), py::arg("sid_mm"),
           py::arg("siso_mm") = py::none())
      .def_readonly("width", &CameraGeometry::width)
      .def_readonly("height", &CameraGeometry::height)
      .def_readonly("spacing_mm", &CameraGeometry::spacing_mm)
      .def_readonly("sid_mm", &CameraGeometry::sid_mm)
      .def_readonly("siso_mm", &CameraGeometry::siso_mm)
      .def("project_point", [](const CameraGeometry& c, const std::array<double, 3>& p) {
        const Eigen::Vector2d uv = c.project_point(Vec3(p[0], p[1], p[2]));
        return std::array<double, 2>{uv.x(), uv.y()};
      });

  m.def(
      "make_phantom",
      [](const std::string& kind, const py::object& dims, double spacing_mm, std::uint64_t seed) {
        return std::make_shared<Volume>(
            make_phantom(parse_phantom_kind(kind), to_dims(dims), spacing_mm, seed));
      },
      py::arg("kind") = "spine", py::arg("dims") = 64, py::arg("spacing_mm") = 3.0,
      py::arg("seed") = 0);
  m.def("save_volume", &save_volume, py::arg("volume"), py::arg("stem"));
  m.def("load_volume", [](const std::filesystem::path& stem) {
    return std::make_shared<Volume>(load_volume(stem));
  });

  m.def(
      "project",
      [](const Volume& v, const CameraGeometry& cam, const std::array<double, 6>& pose,
         double step_mm, std::size_t threads) {
        DetectorImage img;
        {
          py::gil_scoped_release release;
          img = project(v, cam, to_pose(pose), RenderOptions{step_mm, threads});
        }
        return from_image(img);
      },
      py::arg("volume"), py::arg("camera"), py::arg("pose") = std::array<double, 6>{},
      py::arg("step_mm") = 1.0, py::arg("threads") = 1);

  m.def(
      "ncc", [](const ImageArray& a, const ImageArray& b) { return ncc(to_image(a), to_image(b)); },
      py::arg("a"), py::arg("b"));
  m.def(
      "lncc",
      [](const ImageArray& a, const ImageArray& b, int radius) {
        const DetectorImage ia = to_image(a), ib = to_image(b);
        return lncc(ia, ib, make_patch_grid(ia.width, ia.height, radius));
      },
      py::arg("a"), py::arg("b"), py::arg("radius") = 6);
  m.def(
      "mncc",
      [](const ImageArray& a, const ImageArray& b, double mu, int radius) {
        SimilarityConfig cfg;
        cfg.mu = mu;
        cfg.patch_radius = radius;
        return mncc(to_image(a), to_image(b), cfg);
      },
      py::arg("a"), py::arg("b"), py::arg("mu") = 0.5, py::arg("radius") = 6);
  m.def(
      "gc",
      [](const ImageArray& a, const ImageArray& b) {
        return gradient_correlation(to_image(a), to_image(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "similarity",
      [](const ImageArray& a, const ImageArray& b, const std::string& config_json) {
        return similarity(to_image(a), to_image(b), similarity_config(config_json));
      },
      py::arg("a"), py::arg("b"), py::arg("config_json"));

  m.def(
      "register_json",
      [](std::shared_ptr<Volume> v, const CameraGeometry& cam, const ImageArray& fixed,
         const std::array<double, 6>& initial, const std::string& config_json) {
        const RegistrationConfig cfg = nlohmann::json::parse(config_json).get<RegistrationConfig>();
        const DetectorImage f = to_image(fixed, cam.spacing_mm);
        RegistrationResult r;
        {
          py::gil_scoped_release release;
          r = register_pose(v, cam, f, to_pose(initial), cfg);
        }
        nlohmann::json out = to_json(r);
        out["config"] = cfg;
        nlohmann::json trace = nlohmann::json::array();
        for (const GenerationRecord& g : r.trace) trace.push_back(to_json_line(g));
        out["trace"] = std::move(trace);
        return out.dump();
      },
      py::arg("volume"), py::arg("camera"), py::arg("fixed"), py::arg("initial"),
      py::arg("config_json") = "{}");

  m.def(
      "mtre",
      [](const std::array<double, 6>& a, const std::array<double, 6>& b,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& landmarks) {
        if (landmarks.ndim() != 2 || landmarks.shape(1) != 3) {
          throw InvalidArgument("landmarks must have shape (n, 3)");
        }
        LandmarkSet set;
        for (py::ssize_t n = 0; n < landmarks.shape(0); ++n) {
          set.points.emplace_back(landmarks.at(n, 0), landmarks.at(n, 1), landmarks.at(n, 2));
        }
        return mtre(to_pose(a), to_pose(b), set);
      },
      py::arg("a"), py::arg("b"), py::arg("landmarks"));
  m.def("default_landmarks", [](const Volume& v) {
    const LandmarkSet set = default_landmarks(v);
    py::array_t<double> out({static_cast<py::ssize_t>(set.points.size()), py::ssize_t{3}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t n = 0; n < set.points.size(); ++n)
      for (int c = 0; c < 3; ++c) w(n, c) = set.points[n][c];
    return out;
  });
  m.def(
      "pose_error",
      [](const std::array<double, 6>& a, const std::array<double, 6>& b) {
        const PoseError e = pose_error(to_pose(a), to_pose(b));
        return std::make_pair(e.rotation_deg, e.translation_mm);
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "benchmark_json",
      [](const std::string& config_json, const std::string& methods_json) {
        const BenchmarkConfig cfg = nlohmann::json::parse(config_json).get<BenchmarkConfig>();
        std::vector<MethodSpec> methods;
        for (const auto& mj : nlohmann::json::parse(methods_json)) {
          methods.push_back({mj.at("name").get<std::string>(),
                             mj.value("registration", nlohmann::json::object())
                                 .get<RegistrationConfig>()});
        }
        BenchmarkReport report;
        {
          py::gil_scoped_release release;
          report = run_benchmark(cfg, methods);
        }
        nlohmann::json out = to_json(report);
        out["table"] = format_table(report);
        return out.dump();
      },
      py::arg("config_json"), py::arg("methods_json"));
}
