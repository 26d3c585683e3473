#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "skypark/harness.hpp"

namespace py = pybind11;
using namespace skypark;

namespace {

RunOptions make_options(std::optional<std::uint64_t> seed, int threads) {
  RunOptions opts;
  opts.threads = threads;
  opts.seed_override = seed;
  return opts;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Drone light show failure evacuation and recovery simulator";

  m.def("default_scenario",
        [](int n_drones, int failures, std::uint64_t seed) {
          return make_default_scenario(n_drones, failures, seed).to_json_text();
        },
        py::arg("n_drones") = 50, py::arg("failures") = 5, py::arg("seed") = 1,
        "Ready-to-run scenario JSON (lattice show, uniform failure prior)");

  m.def("validate_scenario",
        [](const std::string& spec_json) {
          ScenarioSpec::from_json_text(spec_json);
          return true;
        },
        py::arg("spec_json"), "Throws ValueError when the scenario is malformed");

  m.def("run_incident",
        [](const std::string& spec_json, std::optional<std::uint64_t> seed, int threads,
           const std::string& strategy) {
          const auto spec = ScenarioSpec::from_json_text(spec_json);
          const auto art =
              run_incident(spec, make_options(seed, threads), strategy_from_string(strategy));
          return art.report.to_json_text();
        },
        py::arg("spec_json"), py::arg("seed") = py::none(), py::arg("threads") = 1,
        py::arg("strategy") = "planner", "Full incident pipeline; returns the report as JSON");

  m.def("evaluate_batch",
        [](const std::string& spec_json, int count, std::uint64_t seed, int threads) {
          const auto spec = ScenarioSpec::from_json_text(spec_json);
          const auto result = evaluate_batch(spec, count, seed, threads);
          return py::make_tuple(result.to_csv(), result.summary_json());
        },
        py::arg("spec_json"), py::arg("count") = 20, py::arg("seed") = 1, py::arg("threads") = 1,
        "Paired planner/baseline batch; returns (csv, summary_json)");

  m.def("export_occupancy",
        [](const std::string& spec_json, std::optional<std::uint64_t> seed, int threads) {
          const auto spec = ScenarioSpec::from_json_text(spec_json);
          const auto art = run_incident(spec, make_options(seed, threads));
          std::ostringstream table;
          write_occupancy_table(table, art.combined);
          return table.str();
        },
        py::arg("spec_json"), py::arg("seed") = py::none(), py::arg("threads") = 1,
        "Combined occupancy tile table (ix,iy,iz,t,prob) as CSV text");

  py::register_exception<SpecError>(m, "SpecError", PyExc_ValueError);
}
