#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "scenequal/backbone.hpp"
#include "scenequal/checkpoint.hpp"
#include "scenequal/cli.hpp"
#include "scenequal/distortion.hpp"
#include "scenequal/error.hpp"
#include "scenequal/guidance.hpp"
#include "scenequal/ssim.hpp"

namespace py = pybind11;
using namespace scenequal;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Image to_image(const FloatArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an HxWx3 float array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

FloatArray to_array(const Image& img) {
  FloatArray out({img.height, img.width, 3});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

Clip to_clip(const std::vector<FloatArray>& views) {
  Clip clip;
  clip.reserve(views.size());
  for (const auto& v : views) clip.push_back(to_image(v));
  return clip;
}

nlohmann::json parse(const std::string& text) { return nlohmann::json::parse(text); }

std::map<std::string, double> label_map(const std::map<SceneKey, double>& m) {
  std::map<std::string, double> out;
  for (const auto& [k, v] : m) out[k.scene + "/" + k.method] = v;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of scenequal";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<FormatError> format_error(m, "FormatError", PyExc_ValueError);
  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const FormatError& e) {
      py::set_error(format_error, e.what());
    } catch (const KeyNotFound& e) {
      py::set_error(PyExc_KeyError, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("ssim", [](const FloatArray& a, const FloatArray& b) { return ssim(to_image(a), to_image(b)); },
        py::arg("a"), py::arg("b"));
  m.def("iqa_guidance", [](const std::vector<FloatArray>& s1, const std::vector<FloatArray>& s2) {
    return iqa_guidance(to_clip(s1), to_clip(s2));
  });
  m.def("vqa_guidance", [](const std::vector<FloatArray>& s1, const std::vector<FloatArray>& s2) {
    return vqa_guidance(to_clip(s1), to_clip(s2));
  });
  m.def("rep_guidance", py::overload_cast<double>(&rep_guidance), py::arg("r"));

  m.def(
      "distort",
      [](const FloatArray& img, const std::string& kind, int severity, std::uint64_t seed, std::uint64_t stream) {
        return to_array(apply_distortion(to_image(img), {distortion_kind_from_string(kind), severity, seed}, stream));
      },
      py::arg("image"), py::arg("kind"), py::arg("severity"), py::arg("seed") = 0, py::arg("stream") = 0);

  m.def("cosine_sim", [](const std::vector<double>& u, const std::vector<double>& v) { return cosine_sim(u, v); });
  m.def("mbw_branch_loss", [](const std::vector<double>& p1, const std::vector<double>& p2, double target) {
    return mbw_branch_loss(p1, p2, target);
  });
  m.def("aqb_branch_loss",
        [](const std::vector<double>& p1, const std::vector<double>& p2, double target, double log_sigma) {
          return aqb_branch_loss(p1, p2, target, log_sigma);
        });

  m.def("srcc", [](const std::vector<double>& x, const std::vector<double>& y) { return srcc(x, y); });
  m.def("plcc", [](const std::vector<double>& x, const std::vector<double>& y) { return plcc(x, y); });
  m.def("krcc", [](const std::vector<double>& x, const std::vector<double>& y) { return krcc(x, y); });
  m.def(
      "bradley_terry",
      [](const std::vector<std::string>& items, const std::vector<std::vector<double>>& wins) {
        const auto r = bradley_terry(PreferenceTable{items, wins});
        py::dict d;
        d["scores"] = r.scores;
        d["log_likelihood"] = r.log_likelihood;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("items"), py::arg("wins"));

  m.def("pair_budget_str", &pair_budget_exact);

  m.def(
      "generate_synth_json",
      [](const std::string& spec, const std::filesystem::path& out) {
        const auto labels = generate(parse(spec).get<SynthSpec>(), out);
        return label_map(labels.jod);
      },
      py::arg("spec"), py::arg("out"));

  m.def("parameter_count_json",
        [](const std::string& cfg) { return parameter_count(parse(cfg).get<BackboneConfig>()); });

  m.def("default_config_json", [] { return RunConfig{}.to_json().dump(); });

  m.def(
      "train_json",
      [](const std::string& cfg) {
        const auto run = parse_run_config(parse(cfg));
        const auto index = load_run_dataset(run.data);
        py::gil_scoped_release release;
        return train(index, run.train);
      },
      py::arg("config"));

  m.def(
      "evaluate_json",
      [](const std::string& cfg, const std::filesystem::path& checkpoint) {
        const auto run = parse_run_config(parse(cfg));
        EvaluationResult result;
        {
          py::gil_scoped_release release;
          result = run_evaluation(run, checkpoint);
        }
        return result.report_json.dump();
      },
      py::arg("config"), py::arg("checkpoint"));

  m.def("sha256_file", &sha256_file);

  m.def("run_cli", py::overload_cast<const std::vector<std::string>&>(&run_cli), py::arg("args"));

  py::class_<FrozenModel>(m, "FrozenModel")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def(
          "extract",
          [](const FrozenModel& model, const std::vector<FloatArray>& views) {
            const auto clip = to_clip(views);
            Representation r;
            {
              py::gil_scoped_release release;
              r = model.extract(clip);
            }
            return py::array_t<double>(static_cast<py::ssize_t>(r.size()), r.data());
          },
          py::arg("views"))
      .def_property_readonly("repr_dim", &FrozenModel::repr_dim)
      .def_property_readonly("checkpoint_hash", &FrozenModel::checkpoint_hash)
      .def_property_readonly("config_json", [](const FrozenModel& model) { return nlohmann::json(model.config()).dump(); });
}
