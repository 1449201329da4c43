#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "spinsched/bench.hpp"
#include "spinsched/error.hpp"
#include "spinsched/geometry.hpp"
#include "spinsched/runtime.hpp"
#include "spinsched/scheduling.hpp"
#include "spinsched/spinimage.hpp"

namespace py = pybind11;
using namespace spinsched;

namespace {

using Array3 = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointCloud cloud_from_arrays(const Array3& positions, const Array3& normals) {
  if (positions.ndim() != 2 || positions.shape(1) != 3 || normals.ndim() != 2 || normals.shape(1) != 3 ||
      positions.shape(0) != normals.shape(0)) {
    throw ValidationError("positions and normals must both have shape (M, 3)");
  }
  const auto p = positions.unchecked<2>();
  const auto n = normals.unchecked<2>();
  std::vector<OrientedPoint> points(static_cast<std::size_t>(positions.shape(0)));
  for (py::ssize_t i = 0; i < positions.shape(0); ++i) {
    points[i] = {{p(i, 0), p(i, 1), p(i, 2)}, {n(i, 0), n(i, 1), n(i, 2)}};
  }
  normalize_normals(points);
  return PointCloud(std::move(points));
}

py::array_t<double> column(const PointCloud& cloud, bool normals) {
  py::array_t<double> out({static_cast<py::ssize_t>(cloud.size()), py::ssize_t{3}});
  auto o = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& v = normals ? cloud[i].normal : cloud[i].position;
    o(i, 0) = v.x;
    o(i, 1) = v.y;
    o(i, 2) = v.z;
  }
  return out;
}

// (n, W, W) array of bin counts, row-major per image.
py::array_t<std::uint32_t> stack(const std::vector<SpinImage>& images, std::uint32_t width) {
  py::array_t<std::uint32_t> out({static_cast<py::ssize_t>(images.size()), static_cast<py::ssize_t>(width),
                                  static_cast<py::ssize_t>(width)});
  auto* dst = out.mutable_data();
  const std::size_t per = std::size_t{width} * width;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::memcpy(dst + i * per, images[i].bins().data(), per * sizeof(std::uint32_t));
  }
  return out;
}

std::size_t image_count(const PointCloud& cloud, std::optional<std::size_t> n) {
  return n ? *n : default_image_count(cloud.size());
}

DelayMode parse_mode(const std::string& name) {
  if (name == "auto") return DelayMode::kAuto;
  if (name == "busy") return DelayMode::kBusyWait;
  if (name == "sleep") return DelayMode::kSleep;
  throw UsageError("delay_mode must be auto, busy or sleep");
}

}  // namespace

PYBIND11_MODULE(_spinsched, m) {
  m.doc() = "Spin-image generation with a master-worker runtime and loop schedulers";

  auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", validation.ptr());
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  auto runtime = py::register_exception<RunError>(m, "RunError", PyExc_RuntimeError);
  py::register_exception<ProtocolError>(m, "ProtocolError", runtime.ptr());

  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init(&cloud_from_arrays), py::arg("positions"), py::arg("normals"),
           "Builds a cloud from (M, 3) position and normal arrays; normals are scaled to unit length.")
      .def("__len__", &PointCloud::size)
      .def_property_readonly("positions", [](const PointCloud& c) { return column(c, false); })
      .def_property_readonly("normals", [](const PointCloud& c) { return column(c, true); })
      .def("__eq__", [](const PointCloud& a, const PointCloud& b) { return a == b; });

  py::class_<SpinImageParams>(m, "SpinImageParams")
      .def(py::init([](std::uint32_t width, double bin_size, double support_angle) {
             SpinImageParams p{width, bin_size, support_angle};
             p.validate();
             return p;
           }),
           py::arg("width") = SpinImageParams{}.width, py::arg("bin_size") = SpinImageParams{}.bin_size,
           py::arg("support_angle") = SpinImageParams{}.support_angle)
      .def_readonly("width", &SpinImageParams::width)
      .def_readonly("bin_size", &SpinImageParams::bin_size)
      .def_readonly("support_angle", &SpinImageParams::support_angle);

  m.def(
      "synth_cloud",
      [](const std::string& kind, std::size_t count, std::uint64_t seed) {
        return synth_cloud(parse_synth_kind(kind), count, seed);
      },
      py::arg("kind"), py::arg("count"), py::arg("seed") = 1, "Synthetic cloud: sphere, torus or uniform_box.");

  m.def(
      "load_point_cloud",
      [](const std::filesystem::path& path, const std::string& format) {
        return load_point_cloud(path, parse_cloud_format(format));
      },
      py::arg("path"), py::arg("format") = "xyzn");

  m.def("default_image_count", &default_image_count, py::arg("cloud_size"));

  m.def(
      "generate_spin_images",
      [](const PointCloud& cloud, std::optional<std::size_t> n, const SpinImageParams& params) {
        const auto count = image_count(cloud, n);
        std::vector<SpinImage> images;
        {
          py::gil_scoped_release release;
          images = generate_all_sequential(cloud, count, params);
        }
        return stack(images, params.width);
      },
      py::arg("cloud"), py::arg("n") = py::none(), py::arg("params") = SpinImageParams{},
      "Serial reference: spin images for the first n points as an (n, W, W) uint32 array.");

  m.def(
      "chunk_sequence",
      [](const std::string& kind, std::int64_t n, std::int64_t p) {
        std::vector<std::pair<std::int64_t, std::int64_t>> out;
        for (const auto& c : chunk_sequence(parse_scheduler_kind(kind), n, p)) out.emplace_back(c.start, c.end);
        return out;
      },
      py::arg("kind"), py::arg("n"), py::arg("p"), "Half-open (start, end) chunks in scheduling order.");

  m.def(
      "run_local",
      [](const PointCloud& cloud, std::optional<std::size_t> n, const SpinImageParams& params,
         const std::string& kind, std::size_t workers, std::vector<double> slowdowns, double base_cost,
         const std::string& delay_mode) {
        const auto count = image_count(cloud, n);
        const auto configs = make_worker_configs(workers, slowdowns);
        RunOptions options;
        options.work.base_seconds = base_cost;
        options.work.mode = parse_mode(delay_mode);
        RunResult result;
        {
          py::gil_scoped_release release;
          result = run_local(cloud, count, params, parse_scheduler_kind(kind), configs, options);
        }
        py::dict out;
        out["images"] = stack(result.images, params.width);
        out["parallel_time_s"] = result.report.parallel_time_s;
        out["finishing_times"] = result.report.finishing_times();
        out["assign_messages"] = result.report.assign_messages;
        py::list chunks;
        for (const auto& w : result.report.workers) {
          py::list ranges;
          for (const auto& c : w.chunks) ranges.append(py::make_tuple(c.start, c.end));
          chunks.append(ranges);
        }
        out["chunks"] = chunks;
        return out;
      },
      py::arg("cloud"), py::arg("n") = py::none(), py::arg("params") = SpinImageParams{},
      py::arg("kind") = "ss", py::arg("workers") = 4, py::arg("slowdowns") = std::vector<double>{},
      py::arg("base_cost") = 0.0, py::arg("delay_mode") = "auto",
      "Runs the in-process master-worker runtime and returns images plus timing.");

  m.def("parallel_cost", &parallel_cost, py::arg("workers"), py::arg("parallel_time_s"));
  m.def(
      "load_imbalance",
      [](const std::vector<double>& times) {
        const auto li = load_imbalance(times);
        return py::make_tuple(li.max_over_mean, li.cov);
      },
      py::arg("finishing_times"), "Returns (max/mean, coefficient of variation).");
}
