#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "repsq/harness.hpp"
#include "repsq/io.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw repsq::ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

// Documents cross the boundary as JSON text; the Python package decodes them.
std::string initiator_json(const std::string& config_text, bool record_trace) {
  repsq::TrialOptions opts;
  opts.record_trace = record_trace;
  const auto out = repsq::initiator(repsq::config_from_json(parse(config_text)), opts);
  return json{{"artifact", repsq::artifact_to_json(out.artifact)},
              {"result", repsq::result_to_json(out.result)}}
      .dump();
}

std::string replicator_json(const std::string& artifact_text, std::uint64_t seed,
                            const std::optional<std::string>& sampler_text) {
  const auto artifact = repsq::artifact_from_json(parse(artifact_text));
  std::optional<repsq::SamplerSpec> override;
  if (sampler_text) override = repsq::sampler_from_json(parse(*sampler_text));
  return repsq::result_to_json(repsq::replicator(artifact, seed, override)).dump();
}

std::string pairwise_json(const std::string& config_text, std::size_t pairs,
                          const std::optional<std::string>& sampler_text, unsigned threads) {
  const repsq::Campaign campaign(repsq::config_from_json(parse(config_text)));
  repsq::PairwiseOptions opts;
  opts.threads = threads;
  if (sampler_text) opts.replicator_sampler = repsq::sampler_from_json(parse(*sampler_text));
  return repsq::report_to_json(repsq::pairwise_experiment(campaign, pairs, opts).report).dump();
}

std::string effort_json(const std::string& config_text) {
  const repsq::Campaign campaign(repsq::config_from_json(parse(config_text)));
  const auto t = repsq::effort_comparison(campaign);
  json j = repsq::result_to_json(t.result);
  j["required_n_hoeffding"] = t.required_n_hoeffding;
  j["effort_ratio"] = t.ratio;
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_repsq, m) {
  m.doc() = "Quantized, repeatable statistical-query estimation";
  m.attr("__version__") = REPSQ_VERSION;
  m.attr("RNG_ALGORITHM") = std::string(repsq::kRngAlgorithm);

  auto base = py::register_exception<repsq::Error>(m, "Error");
  py::register_exception<repsq::DomainError>(m, "DomainError", base.ptr());
  py::register_exception<repsq::InfeasibleRepeatability>(m, "InfeasibleRepeatability", base.ptr());
  py::register_exception<repsq::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<repsq::BoundViolation>(m, "BoundViolation", base.ptr());
  py::register_exception<repsq::ArtifactVersionMismatch>(m, "ArtifactVersionMismatch", base.ptr());
  py::register_exception<repsq::NonTerminated>(m, "NonTerminated", base.ptr());

  m.def(
      "compute_alpha",
      [](double gamma, double c, double beta) { return repsq::compute_alpha({gamma, c, beta}); },
      py::arg("gamma"), py::arg("c"), py::arg("beta"));
  m.def(
      "quantized_tolerance",
      [](double gamma, double c, double beta) {
        return repsq::quantized_tolerance({gamma, c, beta});
      },
      py::arg("gamma"), py::arg("c"), py::arg("beta"));
  m.def("collision_probability_lower_bound", &repsq::collision_probability_lower_bound,
        py::arg("gamma"), py::arg("alpha"));

  py::class_<repsq::Partition>(m, "Partition")
      .def(py::init<double, double, double, double>(), py::arg("m_low"), py::arg("m_high"),
           py::arg("alpha"), py::arg("offset") = 0.0)
      .def_property_readonly("m_low", &repsq::Partition::m_low)
      .def_property_readonly("m_high", &repsq::Partition::m_high)
      .def_property_readonly("alpha", &repsq::Partition::alpha)
      .def_property_readonly("offset", &repsq::Partition::offset)
      .def_property_readonly("cell_count", &repsq::Partition::cell_count)
      .def("boundaries", &repsq::Partition::boundaries)
      .def("cell_of", &repsq::Partition::cell_of, py::arg("value"))
      .def("midpoint", &repsq::Partition::midpoint, py::arg("cell"))
      .def("checksum", [](const repsq::Partition& p) { return repsq::partition_checksum(p); })
      .def("__eq__", [](const repsq::Partition& a, const repsq::Partition& b) { return a == b; })
      .def("__len__", &repsq::Partition::cell_count);

  m.def(
      "quantize",
      [](double value, const repsq::Partition& p) {
        const auto q = repsq::quantize(value, p);
        return py::make_tuple(q.value, q.cell, q.clamped);
      },
      py::arg("value"), py::arg("partition"), "Returns (midpoint, cell, clamped).");

  m.def(
      "bernstein_radius",
      [](std::uint64_t n, double variance, double m, double w_bar, double c,
         std::optional<double> joint, const std::string& mode) {
        const auto parsed = repsq::parse_range_term_mode(mode);
        if (!parsed) throw repsq::ConfigError("unknown range term mode '" + mode + "'");
        return repsq::bernstein_radius(n, variance, {m, w_bar, c, joint}, *parsed);
      },
      py::arg("n"), py::arg("variance"), py::arg("m") = 1.0, py::arg("w_bar") = 1.0,
      py::arg("c") = 0.05, py::arg("joint_bound") = py::none(), py::arg("mode") = "paper-exact");
  m.def(
      "hoeffding_radius",
      [](std::uint64_t n, double m, double w_bar, double c) {
        return repsq::hoeffding_radius(n, {m, w_bar, c, std::nullopt});
      },
      py::arg("n"), py::arg("m") = 1.0, py::arg("w_bar") = 1.0, py::arg("c") = 0.05);
  m.def(
      "required_n_hoeffding",
      [](double gamma, double m, double w_bar, double c) {
        return repsq::required_n_hoeffding(gamma, {m, w_bar, c, std::nullopt});
      },
      py::arg("gamma"), py::arg("m") = 1.0, py::arg("w_bar") = 1.0, py::arg("c") = 0.05);

  m.def(
      "tracking_loss",
      [](const std::vector<repsq::TrackingState>& observed, const repsq::TrackingState& cmd) {
        return repsq::tracking_loss(observed, cmd);
      },
      py::arg("observed"), py::arg("commanded"));

  m.def("_initiator", &initiator_json, py::arg("config"), py::arg("record_trace") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("_replicator", &replicator_json, py::arg("artifact"), py::arg("seed"),
        py::arg("sampler") = py::none(), py::call_guard<py::gil_scoped_release>());
  m.def("_pairwise", &pairwise_json, py::arg("config"), py::arg("pairs"),
        py::arg("replicator_sampler") = py::none(), py::arg("threads") = 0u,
        py::call_guard<py::gil_scoped_release>());
  m.def("_effort", &effort_json, py::arg("config"), py::call_guard<py::gil_scoped_release>());
}
