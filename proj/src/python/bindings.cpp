#include "ccmon/simulator.hpp"

#include <nlohmann/json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ccmon;

namespace {

// Structured results cross the boundary as JSON text; the Python side
// decodes them.
std::string dump(const nlohmann::json& j) { return j.dump(); }

Trace trace_from(const std::vector<std::set<std::string>>& props, const std::vector<Cost>& costs) {
  if (!costs.empty() && costs.size() != props.size()) throw py::value_error("costs and events differ in length");
  Trace t;
  for (std::size_t k = 0; k < props.size(); ++k) t.events.push_back({props[k], costs.empty() ? 1 : costs[k], {}});
  return t;
}

nlohmann::json unwind_json(const UnwoundFormula& u) {
  nlohmann::json rows = nlohmann::json::array();
  for (const UnwoundConjunct& c : u.conjuncts)
    rows.push_back({{"qdep", render_formula(c.qdep)}, {"pid", c.pid}, {"constraint", c.constraint}});
  return {{"original", render_formula(u.original)},
          {"unwound", render_formula(u.formula)},
          {"monitored", render_formula(u.monitored)},
          {"changed", u.changed},
          {"constraints", rows}};
}

nlohmann::json simulation_json(const SimulationResult& r) {
  nlohmann::json det = nlohmann::json::array();
  for (const Detection& d : r.detections)
    det.push_back({{"monitor", d.monitor}, {"pid", d.pid}, {"round", d.round}, {"formula", render_formula(d.formula)}});
  nlohmann::json j{{"report", report_to_json(r.report)}, {"detections", det}, {"recoveries", recovery_log_json(r)},
                   {"trace", trace_log_json(r)}};
  j["baseline_detection"] = r.baseline_detection ? nlohmann::json(*r.baseline_detection) : nlohmann::json(nullptr);
  j["bin"] = r.bin ? nlohmann::json(*r.bin) : nlohmann::json(nullptr);
  return j;
}

Scenario scenario_arg(const std::string& spec) {
  if (spec == "sorting_line") return build_sorting_line_scenario(TokenColor::White);
  if (spec == "sorting_line_blue") return build_sorting_line_scenario(TokenColor::Blue);
  return scenario_from_json(nlohmann::json::parse(spec));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ccmon native core";

  // Translators are tried newest first, so the base class goes in first.
  auto base = py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<GraphError>(m, "GraphError", base.ptr());
  py::register_exception<InfeasibleConstraint>(m, "InfeasibleConstraint", base.ptr());
  py::register_exception<ScenarioError>(m, "ScenarioError", base.ptr());

  m.def("render", [](const std::string& text) { return render_formula(parse_formula(text)); }, py::arg("formula"));
  m.def("negate", [](const std::string& text) { return render_formula(negate(parse_formula(text))); }, py::arg("formula"));
  m.def("atoms", [](const std::string& text) { return atoms(parse_formula(text)); }, py::arg("formula"));
  m.def(
      "evaluate",
      [](const std::string& text, const std::vector<std::set<std::string>>& events, const std::vector<Cost>& costs,
         Cost min_event_cost) {
        return std::string(to_string(evaluate_trace(parse_formula(text), trace_from(events, costs), {min_event_cost})));
      },
      py::arg("formula"), py::arg("events"), py::arg("costs") = std::vector<Cost>{}, py::arg("min_event_cost") = 0);
  m.def(
      "unwind", [](const std::string& text, const std::string& graph) {
        return dump(unwind_json(unwind(parse_formula(text), load_graph(graph))));
      },
      py::arg("formula"), py::arg("graph_json"));
  m.def(
      "group",
      [](const std::string& text, const std::string& graph) {
        MonitorSetup s = prepare_monitors(parse_formula(text), load_graph(graph));
        return dump(groups_to_json(s.groups, s.assignment, s.unwound));
      },
      py::arg("formula"), py::arg("graph_json"));
  m.def(
      "tableau_dot", [](const std::string& text) { return export_dot(build_tableau(parse_formula(text))); },
      py::arg("formula"));
  m.def(
      "simulate",
      [](const std::string& scenario, std::optional<std::size_t> rounds) {
        Scenario s = scenario_arg(scenario);
        return dump(simulation_json(run_simulation(s, rounds.value_or(s.rounds))));
      },
      py::arg("scenario"), py::arg("rounds") = py::none());
  m.def(
      "centralized",
      [](const std::string& scenario) {
        Scenario s = scenario_arg(scenario);
        return dump(report_to_json(run_centralized(s.property, run_simulation(s).global_trace)));
      },
      py::arg("scenario"));
  m.def(
      "random_scenario", [](std::uint64_t seed) { return dump(scenario_to_json(random_scenario(seed))); },
      py::arg("seed"));
  m.def(
      "sorting_line", [](bool blue) {
        return dump(scenario_to_json(build_sorting_line_scenario(blue ? TokenColor::Blue : TokenColor::White)));
      },
      py::arg("blue") = false);
}
