#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "tripart/chain_store.hpp"
#include "tripart/csv.hpp"
#include "tripart/dataset.hpp"
#include "tripart/diagnostics.hpp"
#include "tripart/distributions.hpp"
#include "tripart/errors.hpp"
#include "tripart/pipeline.hpp"
#include "tripart/policy.hpp"
#include "tripart/sampler.hpp"
#include "tripart/synthetic.hpp"

namespace py = pybind11;
using namespace tripart;

namespace {

using Json = nlohmann::json;

Json parse_json(const std::string& text, const char* what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

Eigen::MatrixXd draws_matrix(const ChainStore& chain) {
  Eigen::MatrixXd m(chain.size(), chain.width());
  for (Eigen::Index j = 0; j < chain.width(); ++j) m.col(j) = chain.column(j);
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian three-part demand model: sampler, diagnostics and policy simulation";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  m.def("normal_cdf", &dist::normal_cdf, py::arg("x"));
  m.def("normal_quantile", &dist::normal_quantile, py::arg("p"));
  m.def(
      "sample_truncated_normal",
      [](double mean, double variance, double lower, double upper, int n, std::uint64_t seed) {
        RandomStream rng(seed);
        Eigen::VectorXd out(n);
        for (auto& v : out) v = dist::sample_truncated_normal(mean, variance, {lower, upper}, rng);
        return out;
      },
      py::arg("mean"), py::arg("variance"), py::arg("lower"), py::arg("upper"), py::arg("n"),
      py::arg("seed") = 1);

  m.def(
      "simulate",
      [](const std::string& spec_json, py::object seed) {
        auto spec = synthetic::GeneratorSpec::from_json(parse_json(spec_json, "generator spec"));
        if (!seed.is_none()) spec.seed = seed.cast<std::uint64_t>();
        const auto data = synthetic::generate(spec);
        return py::make_tuple(format_csv(data.table), data.column_spec.to_json().dump(), data.truth.dump());
      },
      py::arg("spec_json"), py::arg("seed") = py::none(),
      "Returns (csv text, column spec JSON, truth JSON).");

  py::class_<ChainStore>(m, "Chain")
      .def_property_readonly("size", &ChainStore::size)
      .def_property_readonly("column_names", &ChainStore::column_names)
      .def_property_readonly("draws", &draws_matrix)
      .def("column", py::overload_cast<const std::string&>(&ChainStore::column, py::const_), py::arg("name"))
      .def("to_csv", &ChainStore::to_csv)
      .def("metadata_json", [](const ChainStore& c) { return c.metadata_json().dump(); })
      .def("save", &ChainStore::save, py::arg("stem"))
      .def_static("load", &ChainStore::load, py::arg("stem"))
      .def("__len__", &ChainStore::size);

  m.def(
      "fit",
      [](const std::string& csv_text, const std::string& columns_json, int iterations, int burn_in, int thin,
         std::uint64_t seed) {
        const auto built = build_dataset(parse_csv(csv_text), ColumnSpec::from_json(parse_json(columns_json, "column spec")));
        SamplerConfig cfg;
        cfg.iterations = iterations;
        cfg.burn_in = burn_in;
        cfg.thin = thin;
        cfg.seed = seed;
        ChainStore chain;
        {
          py::gil_scoped_release release;
          chain = run_chain(built.dataset, PriorSpec::noninformative(built.dataset.names().total()), cfg);
        }
        chain.metadata().column_spec = built.spec.to_json();
        return chain;
      },
      py::arg("csv_text"), py::arg("columns_json"), py::arg("iterations") = 6000, py::arg("burn_in") = 1000,
      py::arg("thin") = 5, py::arg("seed") = 1);

  m.def(
      "diagnose", [](const ChainStore& chain) { return diag::diagnose_chain(chain).to_json().dump(); },
      py::arg("chain"), "Diagnostic report as JSON text.");
  m.def(
      "effective_sample_size",
      [](const Eigen::VectorXd& x) {
        return diag::effective_sample_size(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
      },
      py::arg("x"));

  m.def(
      "predict",
      [](const ChainStore& chain, const Eigen::VectorXd& x_access, const Eigen::VectorXd& x_use,
         const Eigen::VectorXd& x_quantity, bool legalized, int simulations, std::uint64_t seed) {
        policy::PredictOptions opt;
        opt.simulations = simulations;
        policy::PredictiveResult r;
        {
          py::gil_scoped_release release;
          r = policy::predict_individual({x_access, x_use, x_quantity}, chain,
                                         legalized ? policy::AccessRegime::legalized : policy::AccessRegime::observed,
                                         opt, RandomStream(seed));
        }
        return r.to_json().dump();
      },
      py::arg("chain"), py::arg("x_access"), py::arg("x_use"), py::arg("x_quantity"), py::arg("legalized") = false,
      py::arg("simulations") = 200, py::arg("seed") = 1, "Predictive probabilities as JSON text.");

  m.def("tax_per_gram", [](double price, double cost) { return policy::Scenario::tax_scenario("", price, cost).tax_per_gram(); },
        py::arg("price"), py::arg("cost") = 1.33);

  m.def(
      "thc_weight",
      [](double regular, double corinto, double creepy, double other) {
        const auto r = pipeline::thc_weight({regular, corinto, creepy, other});
        return py::make_tuple(r.equivalent, r.excluded);
      },
      py::arg("regular") = 0.0, py::arg("corinto") = 0.0, py::arg("creepy") = 0.0, py::arg("other") = 0.0);
  m.def("split_varieties", &pipeline::split_varieties, py::arg("avg_price"), py::arg("total_quantity"),
        py::arg("price_i"), py::arg("price_j"));
  m.def(
      "risk_index",
      [](int rarely, int sometimes, int frequently) {
        return pipeline::to_string(pipeline::risk_index(rarely, sometimes, frequently));
      },
      py::arg("rarely"), py::arg("sometimes"), py::arg("frequently"));
}
