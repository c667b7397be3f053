#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "scg/checkpoint.hpp"
#include "scg/config.hpp"
#include "scg/error.hpp"
#include "scg/eval.hpp"

namespace py = pybind11;
using namespace scg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Python arrays are (n1, n2, slices); the library stores slices outermost.
DenseTensor3 to_tensor(const Array& a) {
  if (a.ndim() != 3) throw DimensionError("expected a 3-d array");
  const auto n1 = static_cast<std::size_t>(a.shape(0)), n2 = static_cast<std::size_t>(a.shape(1)),
             slices = static_cast<std::size_t>(a.shape(2));
  auto view = a.unchecked<3>();
  DenseTensor3 out(n1, n2, slices);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      for (std::size_t t = 0; t < slices; ++t) out(i, j, t) = view(i, j, t);
  return out;
}

Array to_array(const DenseTensor3& x) {
  Array out({x.rows(), x.cols(), x.slices()});
  auto view = out.mutable_unchecked<3>();
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      for (std::size_t t = 0; t < x.slices(); ++t) view(i, j, t) = x(i, j, t);
  return out;
}

// Entries as an (n, 4) array of user, service, slice, value.
Array entries_array(const SparseQosTensor& t) {
  Array out({t.size(), std::size_t{4}});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto& e = t.entries()[k];
    view(k, 0) = e.user;
    view(k, 1) = e.service;
    view(k, 2) = e.slice;
    view(k, 3) = e.value;
  }
  return out;
}

SparseQosTensor from_entries(const Array& a, std::size_t users, std::size_t services, std::size_t slices) {
  if (a.ndim() != 2 || a.shape(1) != 4) throw DimensionError("expected an (n, 4) array");
  auto view = a.unchecked<2>();
  std::vector<QosEntry> entries;
  for (py::ssize_t k = 0; k < a.shape(0); ++k) {
    for (int c = 0; c < 3; ++c)
      if (view(k, c) < 0 || view(k, c) != static_cast<double>(static_cast<std::uint32_t>(view(k, c))))
        throw DataError("row " + std::to_string(k) + ": indices must be non-negative integers");
    entries.push_back({static_cast<std::uint32_t>(view(k, 0)), static_cast<std::uint32_t>(view(k, 1)),
                       static_cast<std::uint32_t>(view(k, 2)), view(k, 3)});
  }
  return SparseQosTensor({users, services, slices}, std::move(entries));
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["rmse"] = r.rmse;
  d["mae"] = r.mae;
  d["entries"] = r.entries;
  return d;
}

}  // namespace

PYBIND11_MODULE(_scg, m) {
  m.doc() = "Spatiotemporal graph convolution for time-aware QoS prediction";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  // tensor algebra
  m.def("mixing_matrix", [](std::size_t slices, std::size_t window) {
    const auto theta = MixingMatrix::build(slices, window);
    Array out({slices, slices});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t t = 0; t < slices; ++t)
      for (std::size_t i = 0; i < slices; ++i) view(t, i) = theta.at(t, i);
    return out;
  }, py::arg("slices"), py::arg("window"));
  m.def("theta_transform", [](const Array& x, std::size_t window) {
    const auto t = to_tensor(x);
    return to_array(theta_transform(t, MixingMatrix::build(t.slices(), window)));
  }, py::arg("x"), py::arg("window"));
  m.def("facewise_product", [](const Array& x, const Array& y) {
    return to_array(facewise_product(to_tensor(x), to_tensor(y)));
  }, py::arg("x"), py::arg("y"));
  m.def("theta_product", [](const Array& x, const Array& y, std::size_t window) {
    const auto a = to_tensor(x);
    return to_array(theta_product(a, to_tensor(y), MixingMatrix::build(a.slices(), window)));
  }, py::arg("x"), py::arg("y"), py::arg("window"));

  // data
  py::class_<SparseQosTensor>(m, "QosTensor")
      .def(py::init(&from_entries), py::arg("entries"), py::arg("users"), py::arg("services"), py::arg("slices"))
      .def_property_readonly("dims", [](const SparseQosTensor& t) {
        return py::make_tuple(t.dims().users, t.dims().services, t.dims().slices);
      })
      .def("entries", &entries_array)
      .def("__len__", &SparseQosTensor::size)
      .def("__eq__", [](const SparseQosTensor& a, const SparseQosTensor& b) { return a == b; });

  m.def("load_dataset", [](const std::string& path) { return load_dataset(path); }, py::arg("path"));
  m.def("save_dataset", [](const std::string& path, const SparseQosTensor& t) { save_dataset(path, t); },
        py::arg("path"), py::arg("tensor"));
  m.def("normalize_values", &normalize_values, py::arg("tensor"), py::arg("lo") = 0.0, py::arg("hi") = 10.0);
  m.def("split", [](const SparseQosTensor& t, double fraction, std::uint64_t seed) {
    auto s = split(t, fraction, seed);
    return py::make_tuple(s.train, s.test);
  }, py::arg("tensor"), py::arg("train_fraction"), py::arg("seed"));
  m.def("generate_synthetic",
        [](std::size_t users, std::size_t services, std::size_t slices, std::size_t rank, double smoothness,
           double noise, double density, std::uint64_t seed) {
          return generate_synthetic({users, services, slices, rank, smoothness, noise, density, seed});
        },
        py::arg("users") = 20, py::arg("services") = 30, py::arg("slices") = 8, py::arg("rank") = 4,
        py::arg("smoothness") = 0.95, py::arg("noise") = 0.1, py::arg("density") = 0.3, py::arg("seed") = 1);

  // training
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def(py::init([](py::kwargs kwargs) {
        TrainConfig c;
        for (const auto& [key, value] : kwargs) {
          const auto k = py::str(key).cast<std::string>();
          if (!apply_setting(c, k, py::str(value).cast<std::string>())) throw ConfigError("unknown config key '" + k + "'");
        }
        return c;
      }))
      .def_readwrite("latent_dim", &TrainConfig::latent_dim)
      .def_readwrite("layers", &TrainConfig::layers)
      .def_readwrite("window", &TrainConfig::window)
      .def_property("pooling", [](const TrainConfig& c) { return std::string(to_string(c.pooling)); },
                    [](TrainConfig& c, const std::string& v) { c.pooling = parse_pooling(v); })
      .def_readwrite("regularization", &TrainConfig::regularization)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("patience", &TrainConfig::patience)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_property("adjacency", [](const TrainConfig& c) { return std::string(to_string(c.adjacency)); },
                    [](TrainConfig& c, const std::string& v) { c.adjacency = parse_adjacency_mode(v); })
      .def_readwrite("validation_fraction", &TrainConfig::validation_fraction)
      .def("to_dict", [](const TrainConfig& c) {
        py::dict d;
        for (const auto& [k, v] : to_key_values(c)) d[py::str(k)] = v;
        return d;
      })
      .def("__eq__", [](const TrainConfig& a, const TrainConfig& b) { return a == b; });

  py::class_<Model>(m, "Model")
      .def_readonly("config", &Model::config)
      .def_property_readonly("users", [](const Model& model) { return to_array(model.users); })
      .def_property_readonly("services", [](const Model& model) { return to_array(model.services); })
      .def("predict", [](const Model& model, const SparseQosTensor& t) {
        const auto p = model.predict(t.entries());
        return Array(static_cast<py::ssize_t>(p.size()), p.data());
      }, py::arg("tensor"));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("model", &FitResult::model)
      .def_property_readonly("history", [](const FitResult& r) {
        py::list out;
        for (const auto& e : r.history) out.append(py::make_tuple(e.epoch, e.train_loss, e.val_rmse));
        return out;
      })
      .def_property_readonly("best_epoch", [](const FitResult& r) { return r.state.best_epoch; })
      .def_property_readonly("history_csv", [](const FitResult& r) {
        std::ostringstream out;
        write_history_csv(out, r.history);
        return out.str();
      });

  m.def("fit", [](const TrainConfig& config, const SparseQosTensor& train) {
    py::gil_scoped_release release;
    return fit(config, DatasetSplit{train, SparseQosTensor(train.dims(), {}), 0, 0.0});
  }, py::arg("config"), py::arg("train"));
  m.def("evaluate", [](const Model& model, const SparseQosTensor& test) { return report_dict(evaluate(model, test)); },
        py::arg("model"), py::arg("test"));
  m.def("metrics_json", [](const Model& model, const SparseQosTensor& test) {
    return metrics_json(evaluate(model, test));
  }, py::arg("model"), py::arg("test"));
  m.def("ablate", [](const TrainConfig& config, const SparseQosTensor& train, const SparseQosTensor& test) {
    AblationResult r;
    {
      py::gil_scoped_release release;
      r = ablate(config, DatasetSplit{train, test, 0, 0.0});
    }
    py::dict d;
    d["SCG"] = report_dict(r.full);
    d["SCG-w/o-T"] = report_dict(r.without_temporal);
    d["SCG-w/o-S&T"] = report_dict(r.without_spatiotemporal);
    return d;
  }, py::arg("config"), py::arg("train"), py::arg("test"));
}
