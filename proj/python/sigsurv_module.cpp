#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sigsurv/dataset_io.hpp"
#include "sigsurv/diagnostics.hpp"
#include "sigsurv/error.hpp"
#include "sigsurv/fit.hpp"
#include "sigsurv/metrics.hpp"
#include "sigsurv/serialize.hpp"
#include "sigsurv/signature.hpp"
#include "sigsurv/simulate.hpp"

namespace py = pybind11;
using namespace sigsurv;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

SampledPath to_path(const Array& times, const Array& values) {
  if (times.ndim() != 1) throw ValidationError("times must be one-dimensional");
  std::size_t channels = 1;
  if (values.ndim() == 2) {
    channels = static_cast<std::size_t>(values.shape(1));
  } else if (values.ndim() != 1) {
    throw ValidationError("values must be (K,) or (K, channels)");
  }
  std::vector<double> t(times.data(), times.data() + times.size());
  std::vector<double> v(values.data(), values.data() + values.size());
  return SampledPath(std::move(t), std::move(v), channels);
}

py::array_t<double> to_array(std::span<const double> v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  auto r = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<py::ssize_t>(i)) = v[i];
  return out;
}

IntensityModel parse_model(const std::string& text) { return model_from_json(Json::parse(text)); }

}  // namespace

PYBIND11_MODULE(_sigsurv, m) {
  m.doc() = "Signature-based dynamic survival analysis";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("sig_dim", &sig_dim, py::arg("d"), py::arg("depth"));

  m.def(
      "signature",
      [](const Array& times, const Array& values, int depth, std::optional<double> horizon) {
        const SampledPath p = to_path(times, values);
        const double h = horizon.value_or(p.last_time());
        return to_array(path_signature(embed_fill_forward(p, h), h, depth).coefficients());
      },
      py::arg("times"), py::arg("values"), py::arg("depth"), py::arg("horizon") = py::none(),
      "Signature of the fill-forward embedding (time channel last) on [0, horizon].");

  m.def(
      "fbm",
      [](double hurst, int points, double horizon, std::size_t channels, std::size_t count,
         std::uint64_t seed) {
        const auto paths = fbm_paths(hurst, points, horizon, channels, count, seed);
        Array out({static_cast<py::ssize_t>(count), static_cast<py::ssize_t>(points),
                   static_cast<py::ssize_t>(channels)});
        double* dst = out.mutable_data();
        for (const auto& p : paths) dst = std::copy(p.values().begin(), p.values().end(), dst);
        return out;
      },
      py::arg("hurst"), py::arg("points"), py::arg("horizon"), py::arg("channels"),
      py::arg("count"), py::arg("seed"));

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("size", &Dataset::size)
      .def_property_readonly("horizon", [](const Dataset& d) { return d.horizon; })
      .def_property_readonly("feature_names", [](const Dataset& d) { return d.feature_names; })
      .def_property_readonly("static_names", [](const Dataset& d) { return d.static_names; })
      .def_property_readonly("event_times",
                             [](const Dataset& d) {
                               std::vector<double> t;
                               for (const auto& r : d.records) t.push_back(r.event_time);
                               return t;
                             })
      .def_property_readonly("events",
                             [](const Dataset& d) {
                               std::vector<bool> e;
                               for (const auto& r : d.records) e.push_back(r.event);
                               return e;
                             })
      .def("censoring_rate", &Dataset::censoring_rate)
      .def("mean_observation_count", &Dataset::mean_observation_count)
      .def("subset", [](const Dataset& d, const std::vector<std::size_t>& idx) { return d.subset(idx); })
      .def("__len__", &Dataset::size);

  m.def("load_dataset", [](const std::string& lon, const std::string& rec) { return load_dataset(lon, rec); },
        py::arg("longitudinal"), py::arg("records"));
  m.def("save_dataset", [](const Dataset& d, const std::string& lon, const std::string& rec) {
    save_dataset(d, lon, rec);
  }, py::arg("dataset"), py::arg("longitudinal"), py::arg("records"));

  m.def(
      "simulate_ou",
      [](std::size_t n, std::uint64_t seed, int grid_points, std::size_t keep_every,
         bool per_step_noise) {
        OUConfig cfg;
        cfg.n = n;
        cfg.seed = seed;
        cfg.grid_points = grid_points;
        cfg.keep_every = keep_every;
        cfg.per_step_noise = per_step_noise;
        return ou_hitting_dataset(cfg).data;
      },
      py::arg("n") = 500, py::arg("seed") = 0, py::arg("grid_points") = 1000,
      py::arg("keep_every") = 1, py::arg("per_step_noise") = false);

  m.def(
      "simulate_tumor",
      [](std::size_t n, std::uint64_t seed, int grid_points, std::size_t keep_every) {
        TumorConfig cfg;
        cfg.n = n;
        cfg.seed = seed;
        cfg.grid_points = grid_points;
        cfg.keep_every = keep_every;
        return tumor_growth_dataset(cfg).data;
      },
      py::arg("n") = 500, py::arg("seed") = 0, py::arg("grid_points") = 1000,
      py::arg("keep_every") = 1);

  m.def(
      "simulate_thinning",
      [](std::size_t n, std::uint64_t seed, int depth) {
        ThinningConfig cfg;
        cfg.n = n;
        cfg.seed = seed;
        cfg.depth = depth;
        const auto truth = thinning_truth(cfg);
        return py::make_tuple(thinning_dataset(cfg, truth).data, model_to_json(truth).dump());
      },
      py::arg("n") = 200, py::arg("seed") = 0, py::arg("depth") = 2,
      "Returns (dataset, truth model as JSON text).");

  m.def(
      "fit_coxsig",
      [](const Dataset& d, int depth, bool plus, double eta1, double eta2, double gamma,
         bool fast) {
        ElasticNetConfig pen;
        pen.eta1 = eta1;
        pen.eta2 = eta2;
        pen.gamma = gamma;
        pen.precondition = fast;
        pen.accelerate = fast;
        py::gil_scoped_release release;
        const auto fit = fit_coxsig(d, depth, plus, pen);
        return model_to_json(fit.params).dump();
      },
      py::arg("dataset"), py::arg("depth") = 2, py::arg("plus") = false, py::arg("eta1") = 0.0,
      py::arg("eta2") = 0.0, py::arg("gamma") = 0.1, py::arg("fast") = false,
      "Returns the fitted model as JSON text.");

  m.def(
      "neg_log_likelihood",
      [](const std::string& model, const Dataset& d) { return neg_log_likelihood(parse_model(model), d); },
      py::arg("model"), py::arg("dataset"));

  m.def(
      "evaluate",
      [](const std::string& model, const Dataset& d, double dt, std::vector<double> times) {
        if (times.empty()) times = default_eval_times(d);
        return to_json(evaluate_model(parse_model(model), d, times, dt)).dump();
      },
      py::arg("model"), py::arg("dataset"), py::arg("dt"), py::arg("times") = std::vector<double>{},
      "Metric report as JSON text.");

  m.def(
      "survival",
      [](const std::string& model, const Dataset& d, double t, double dt) {
        return to_array(survival_predictions(parse_model(model), d, t, dt));
      },
      py::arg("model"), py::arg("dataset"), py::arg("t"), py::arg("dt"));

  m.def(
      "divergences",
      [](const std::string& truth, const std::string& model, const Dataset& d) {
        return to_json(empirical_divergences(parse_model(truth), parse_model(model), d)).dump();
      },
      py::arg("truth"), py::arg("model"), py::arg("dataset"));
}
