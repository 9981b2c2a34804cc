#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>

#include "lbgan/cli.hpp"
#include "lbgan/errors.hpp"
#include "lbgan/image.hpp"
#include "lbgan/inference.hpp"
#include "lbgan/losses.hpp"
#include "lbgan/mask.hpp"
#include "lbgan/synthetic.hpp"

namespace py = pybind11;
using namespace lbgan;

namespace {

template <class T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

torch::Tensor tensor_from(const Array<double>& a) {
  std::vector<std::int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone();
}

torch::Tensor labels_from(const Array<std::int64_t>& a) {
  std::vector<std::int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<std::int64_t*>(a.data()), shape, torch::kLong).clone();
}

torch::Tensor face_from(const Array<float>& a) {
  std::vector<std::int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<float*>(a.data()), shape, torch::kFloat32).clone();
}

Array<float> to_array(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat32).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  Array<float> out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<float>(), sizeof(float) * static_cast<std::size_t>(c.numel()));
  return out;
}

LandmarkSet landmarks_from(const std::array<std::array<double, 2>, 3>& p) {
  return {{p[0][0], p[0][1]}, {p[1][0], p[1][1]}, {p[2][0], p[2][1]}};
}

double scalar(const torch::Tensor& t) { return t.item<double>(); }

}  // namespace

PYBIND11_MODULE(_lbgan, m) {
  m.doc() = "Face rotation GAN: synthetic data, losses, synthesis and the command-line entry point";
  torch::set_num_threads(1);

  static py::exception<Error> base(m, "LbganError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });
  // translators run newest first, so the specific classes go after the base
  py::register_exception<InvalidRequest>(m, "InvalidRequest", base);
  py::register_exception<InvalidInput>(m, "InvalidInput", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<CheckpointError>(m, "CheckpointError", base);
  py::register_exception<StateError>(m, "StateError", base);

  m.def(
      "generate_synthetic_dataset",
      [](int n_identities, std::uint64_t seed, int image_size, const std::filesystem::path& out, const std::string& split) {
        generate_synthetic_dataset(n_identities, seed, image_size, out, split_from_string(split));
        return (out / "manifest.json").string();
      },
      py::arg("n_identities"), py::arg("seed"), py::arg("image_size"), py::arg("out_dir"), py::arg("split") = "train",
      "Render every identity at all 13 yaws; returns the manifest path.");
  m.def("dataset_digest", [](const std::filesystem::path& p) { return cli::dataset_digest(p); }, py::arg("manifest"));
  m.def(
      "load_face", [](const std::filesystem::path& p) { return to_array(to_face_tensor(read_png(p))); }, py::arg("path"),
      "Aligned PNG as a float32 [3, H, W] array in [-1, 1].");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run an lbgan subcommand; returns (exit_code, stdout, stderr).");

  m.def(
      "build_mask",
      [](const std::array<std::array<double, 2>, 3>& lm, int size) { return to_array(build_mask(landmarks_from(lm), size)); },
      py::arg("landmarks"), py::arg("image_size"), "Landmarks as ((row, col) left eye, right eye, mouth).");
  m.def("remote_code", [](double deg) { return code_for_degrees(deg).weights(); }, py::arg("degrees"));
  m.def("output_filename", &output_filename, py::arg("prefix"), py::arg("degrees"));

  m.def(
      "attention_l2",
      [](const Array<double>& x, const Array<double>& x_hat, const Array<double>& mask) {
        return scalar(attention_l2(tensor_from(x), tensor_from(x_hat), tensor_from(mask)));
      },
      py::arg("x"), py::arg("x_hat"), py::arg("mask"));
  m.def(
      "csc_loss",
      [](const Array<double>& x, const Array<double>& x_hat, const Array<double>& mask, const Array<std::int64_t>& y_p,
         const Array<std::int64_t>& c_star) {
        return scalar(csc_loss(tensor_from(x), tensor_from(x_hat), tensor_from(mask), labels_from(y_p), labels_from(c_star)));
      },
      py::arg("x"), py::arg("x_hat"), py::arg("mask"), py::arg("y_p"), py::arg("c_star"));
  m.def(
      "d_n_loss",
      [](const Array<double>& real, const Array<std::int64_t>& y, const Array<double>& fake) {
        return scalar(d_n_loss(tensor_from(real), labels_from(y), tensor_from(fake)));
      },
      py::arg("probs_real"), py::arg("y_id"), py::arg("probs_fake"));
  m.def(
      "g_n_loss",
      [](const Array<double>& fake, const Array<std::int64_t>& y) { return scalar(g_n_loss(tensor_from(fake), labels_from(y))); },
      py::arg("probs_fake"), py::arg("y_id"));
  m.def(
      "d_e_loss",
      [](const Array<double>& id_real, const Array<std::int64_t>& y, const Array<double>& pose_real,
         const Array<std::int64_t>& y_p, const Array<double>& id_fake) {
        return scalar(d_e_loss(tensor_from(id_real), labels_from(y), tensor_from(pose_real), labels_from(y_p), tensor_from(id_fake)));
      },
      py::arg("id_probs_real"), py::arg("y_id"), py::arg("pose_probs_real"), py::arg("y_p"), py::arg("id_probs_fake"));
  m.def(
      "g_e_loss",
      [](const Array<double>& pose_fake, const Array<std::int64_t>& c_star, const Array<double>& id_fake,
         const Array<std::int64_t>& y) {
        return scalar(g_e_loss(tensor_from(pose_fake), labels_from(c_star), tensor_from(id_fake), labels_from(y)));
      },
      py::arg("pose_probs_fake"), py::arg("c_star"), py::arg("id_probs_fake"), py::arg("y_id"));

  py::class_<FrozenModel>(m, "Model")
      .def_static("load", &FrozenModel::load, py::arg("checkpoint_dir"))
      .def_property_readonly("image_size", &FrozenModel::image_size)
      .def_property_readonly("variant", [](const FrozenModel& f) { return to_string(f.bundle().config.variant); })
      .def(
          "frontalize", [](const FrozenModel& f, const Array<float>& x) { return to_array(frontalize(f, face_from(x))); },
          py::arg("image"))
      .def(
          "rotate",
          [](const FrozenModel& f, const Array<float>& x, double deg) { return to_array(rotate(f, {face_from(x), deg})); },
          py::arg("image"), py::arg("degrees"))
      .def(
          "pose_sweep",
          [](const FrozenModel& f, const Array<float>& x, const std::vector<double>& degs) {
            return to_array(pose_sweep_grid(f, face_from(x), degs));
          },
          py::arg("image"), py::arg("degrees") = all_grid_degrees())
      .def(
          "morph",
          [](const FrozenModel& f, const Array<float>& a, const Array<float>& b, int steps) {
            std::vector<Array<float>> out;
            for (const auto& t : identity_morph_tiles(f, face_from(a), face_from(b), steps)) out.push_back(to_array(t));
            return out;
          },
          py::arg("a"), py::arg("b"), py::arg("steps"));
}
