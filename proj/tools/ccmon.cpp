// ccmon command line front end.
//
// Exit codes: 0 ok, 1 formula parse error, 2 graph or scenario error,
// 3 infeasible constraint, 4 unobservable atom, 5 check disagreement,
// 64 usage error.

#include "ccmon/simulator.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

using namespace ccmon;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kParse = 1, kGraph = 2, kInfeasible = 3, kUnobservable = 4, kDisagree = 5, kUsage = 64 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string formula;
  std::string graph;
  std::string scenario;
  std::optional<std::size_t> rounds;
  std::string format = "text";
  std::string out;
  std::vector<std::string> faults;
  std::optional<std::uint64_t> seed;
  bool negate = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A formula file may hold comment lines starting with '#'. A value that is
// not an existing file is read as formula text.
Formula load_formula(const std::string& arg) {
  if (arg.empty()) throw UsageError("--formula is required");
  std::string text = arg;
  if (fs::is_regular_file(arg)) {
    std::istringstream in(read_file(arg));
    text.clear();
    for (std::string line; std::getline(in, line);) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      text += line + " ";
    }
  }
  return parse_formula(text);
}

DependencyGraph load_graph_arg(const std::string& arg) {
  if (arg.empty()) throw UsageError("--graph is required");
  if (!fs::is_regular_file(arg)) throw UsageError("graph file not found: " + arg);
  return load_graph_file(arg);
}

FaultSpec parse_fault(const std::string& text) {
  static const std::regex re(R"(^([a-z_]+)(?:\+(\d+))?@(\d+)(?::([A-Za-z0-9_]+))?$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw UsageError("bad --fault '" + text + "', expected KIND[+N]@ROUND[:TARGET]");
  FaultSpec f;
  f.kind = fault_kind_from_string(m[1]);
  if (m[2].matched) f.extra = std::stoll(m[2]);
  f.at_round = std::stoull(m[3]);
  if (m[4].matched) f.target = m[4];
  return f;
}

Scenario load_scenario_arg(const Options& o) {
  if (o.scenario.empty()) throw UsageError("--scenario is required");
  Scenario s;
  if (o.scenario == "sorting_line") s = build_sorting_line_scenario(TokenColor::White);
  else if (o.scenario == "sorting_line_blue") s = build_sorting_line_scenario(TokenColor::Blue);
  else if (!fs::is_regular_file(o.scenario)) throw UsageError("scenario file not found: " + o.scenario);
  else s = load_scenario_file(o.scenario);
  for (const std::string& f : o.faults) s.faults.push_back(parse_fault(f));
  if (o.seed) s.seed = *o.seed;
  s.validate();
  return s;
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.out);
  if (!out) throw UsageError("cannot write " + o.out);
  out << text;
}

std::string verdict_text(const MonitorReport& r) {
  std::string s(to_string(r.global_verdict));
  if (r.detection_round) s += " at round " + std::to_string(*r.detection_round);
  if (r.detecting_pid) s += " (" + *r.detecting_pid + ")";
  return s;
}

// ---------------------------------------------------------------------------

int cmd_parse(const Options& o) {
  const Formula f = load_formula(o.formula);
  if (o.format == "json") {
    json j{{"formula", render_formula(f)},
           {"nnf", render_formula(normalize(f))},
           {"negated", render_formula(negate(f))},
           {"atoms", atoms(f)}};
    emit(o, j.dump(2) + "\n");
  } else {
    std::ostringstream s;
    s << "formula: " << render_formula(f) << "\n"
      << "nnf:     " << render_formula(normalize(f)) << "\n"
      << "negated: " << render_formula(negate(f)) << "\n"
      << "atoms:  ";
    for (const std::string& a : atoms(f)) s << " " << a;
    s << "\n";
    emit(o, s.str());
  }
  return kOk;
}

int cmd_unwind(const Options& o) {
  const Formula f = load_formula(o.formula);
  const DependencyGraph g = load_graph_arg(o.graph);
  const UnwoundFormula u = unwind(f, g);
  if (o.format == "json") {
    json rows = json::array();
    for (const UnwoundConjunct& c : u.conjuncts)
      rows.push_back({{"qdep", render_formula(c.qdep)}, {"pid", c.pid}, {"constraint", c.constraint}});
    emit(o, json{{"original", render_formula(u.original)},
                 {"unwound", render_formula(u.formula)},
                 {"monitored", render_formula(u.monitored)},
                 {"changed", u.changed},
                 {"constraints", rows}}
                    .dump(2) +
                "\n");
    return kOk;
  }
  std::ostringstream s;
  s << "formula: " << render_formula(u.original) << "\n";
  if (!u.changed) {
    s << "nothing to unwind\n";
    emit(o, s.str());
    return kOk;
  }
  s << "unwound: " << render_formula(u.formula) << "\n"
    << "constraints:\n";
  std::size_t width = 0;
  for (const UnwoundConjunct& c : u.conjuncts) width = std::max(width, render_formula(c.qdep).size());
  for (const UnwoundConjunct& c : u.conjuncts) {
    const std::string q = render_formula(c.qdep);
    s << "  " << q << std::string(width - q.size() + 2, ' ') << c.pid << "  " << c.constraint << "\n";
  }
  emit(o, s.str());
  return kOk;
}

Formula tableau_input(const Options& o) {
  Formula f = load_formula(o.formula);
  if (!o.graph.empty()) f = negate(unwind(f, load_graph_arg(o.graph)).formula);
  else if (o.negate) f = negate(f);
  return f;
}

int cmd_tableau(const Options& o) {
  const Tableau t = build_tableau(tableau_input(o));
  if (o.format == "dot") {
    emit(o, export_dot(t));
    return kOk;
  }
  const auto branches = t.branches();
  const auto ticked = t.ticked_branches();
  if (o.format == "json") {
    json tb = json::array();
    for (const Branch& b : ticked) {
      json fs = json::array();
      for (const Formula& f : terminal_node(t, b)) fs.push_back(render_formula(f));
      tb.push_back({{"nodes", b.nodes}, {"terminal", fs}});
    }
    emit(o, json{{"nodes", t.size()}, {"branches", branches.size()}, {"ticked", tb}}.dump(2) + "\n");
    return kOk;
  }
  if (o.format != "text") throw UsageError("unknown format " + o.format);
  std::ostringstream s;
  s << "nodes: " << t.size() << "\nbranches: " << branches.size() << "\nticked: " << ticked.size() << "\n";
  for (const Branch& b : ticked) {
    s << " ";
    for (const Formula& f : terminal_node(t, b)) s << " " << render_formula(f);
    s << "\n";
  }
  emit(o, s.str());
  return kOk;
}

int cmd_group(const Options& o) {
  const Formula f = load_formula(o.formula);
  const DependencyGraph g = load_graph_arg(o.graph);
  MonitorSetup m = prepare_monitors(f, g);
  if (o.format == "json") {
    emit(o, groups_to_json(m.groups, m.assignment, m.unwound).dump(2) + "\n");
    return kOk;
  }
  std::vector<std::pair<std::string, std::string>> rows;
  for (const MonitorGroup& grp : m.groups) {
    bool owned = false;
    for (const std::string& pid : grp.comm_order)
      if (auto it = m.assignment.find(pid); it != m.assignment.end()) {
        rows.emplace_back(render_formula(it->second), pid);
        owned = true;
      }
    if (owned) continue;
    const bool all = grp.members.size() == g.processes().size();
    std::string who = all ? "all processes" : "";
    if (!all)
      for (const std::string& pid : grp.comm_order) who += (who.empty() ? "" : ",") + pid;
    rows.emplace_back(render_formula(grp.formula), who);
  }
  std::size_t width = 10;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  std::ostringstream s;
  s << "sub-formula" << std::string(width - 9, ' ') << "process\n";
  for (const auto& [formula, pid] : rows) s << formula << std::string(width - formula.size() + 2, ' ') << pid << "\n";
  emit(o, s.str());
  return kOk;
}

json simulation_json(const Scenario& s, const SimulationResult& r) {
  json det = json::array();
  for (const Detection& d : r.detections)
    det.push_back({{"monitor", d.monitor}, {"pid", d.pid}, {"round", d.round}, {"formula", render_formula(d.formula)}});
  json j{{"scenario", s.name}, {"report", report_to_json(r.report)}, {"detections", det},
         {"recoveries", recovery_log_json(r)}};
  j["baseline_detection"] = r.baseline_detection ? json(*r.baseline_detection) : json(nullptr);
  j["bin"] = r.bin ? json(*r.bin) : json(nullptr);
  return j;
}

int cmd_simulate(const Options& o) {
  const Scenario s = load_scenario_arg(o);
  const SimulationResult r = run_simulation(s, o.rounds.value_or(s.rounds));
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / "trace.json") << trace_log_json(r).dump(1) << "\n";
    std::ofstream(fs::path(o.out) / "report.json") << simulation_json(s, r).dump(2) << "\n";
    std::ofstream(fs::path(o.out) / "recovery.json") << recovery_log_json(r).dump(2) << "\n";
  }
  if (o.format == "json") {
    std::cout << simulation_json(s, r).dump(2) << "\n";
    return kOk;
  }
  std::cout << "scenario: " << s.name << "\n"
            << "rounds: " << r.report.rounds << "\n"
            << "verdict: " << verdict_text(r.report) << "\n"
            << "messages: " << r.report.total_messages() << "\n";
  for (const Detection& d : r.detections)
    std::cout << "violation: " << d.monitor << " on " << d.pid << " at round " << d.round << "  "
              << render_formula(d.formula) << "\n";
  if (r.baseline_detection)
    std::cout << "baseline: violation on " << s.baseline->pid << " at round " << *r.baseline_detection << "\n";
  for (const RecoveryRecord& rec : r.recovery_log)
    std::cout << "recovery: round " << rec.round << " " << to_string(rec.fault.kind) << " on " << rec.fault.target
              << " -> " << to_string(rec.action.kind) << " (" << rec.monitor << ")\n";
  if (r.bin) std::cout << "bin: " << *r.bin << "\n";
  return kOk;
}

int cmd_check(const Options& o) {
  Scenario s = load_scenario_arg(o);
  if (!o.graph.empty()) s.graph = load_graph_arg(o.graph);
  if (!o.formula.empty()) s.property = load_formula(o.formula);
  s.validate();
  const SimulationResult r = run_simulation(s, o.rounds.value_or(s.rounds));
  const MonitorReport c = run_centralized(s.property, r.global_trace);
  const MonitorReport& d = r.report;

  bool agree = d.global_verdict == c.global_verdict;
  if (agree && d.global_verdict != Verdict::Unknown && d.detection_round && c.detection_round)
    agree = *d.detection_round <= *c.detection_round;

  if (o.format == "json") {
    std::cout << json{{"agree", agree}, {"decentralized", report_to_json(d)}, {"centralized", report_to_json(c)}}.dump(2)
              << "\n";
    return agree ? kOk : kDisagree;
  }
  std::cout << "decentralized: " << verdict_text(d) << "\n"
            << "centralized: " << verdict_text(c) << "\n";
  if (!agree) {
    std::cout << "disagree: decentralized " << to_string(d.global_verdict) << ", centralized "
              << to_string(c.global_verdict) << "\n";
    return kDisagree;
  }
  std::cout << "agree: " << to_string(d.global_verdict);
  if (d.detection_round && c.detection_round)
    std::cout << "; decentralized round " << *d.detection_round << " <= centralized round " << *c.detection_round;
  std::cout << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized monitoring of cumulative cost properties.\n\n"
               "Exit codes: 0 ok, 1 formula parse error, 2 graph or scenario error, 3 infeasible constraint,\n"
               "4 unobservable atom, 5 decentralized and centralized verdicts disagree, 64 usage error."};
  app.require_subcommand(1, 1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--format", o.format, "text, json or dot")->check(CLI::IsMember({"text", "json", "dot"}));
    sub->add_option("--out", o.out, "Write output to this path (simulate: a directory)");
  };
  auto* parse = app.add_subcommand("parse", "Parse a formula and print its normal forms");
  parse->add_option("--formula", o.formula, "Formula file or formula text")->required();
  add_common(parse);

  auto* unwind_cmd = app.add_subcommand("unwind", "Unwind a formula over a dependency graph");
  unwind_cmd->add_option("--formula", o.formula, "Formula file or formula text")->required();
  unwind_cmd->add_option("--graph", o.graph, "Dependency graph JSON")->required();
  add_common(unwind_cmd);

  auto* tableau = app.add_subcommand("tableau", "Build the tableau of a formula (DOT by default)");
  tableau->add_option("--formula", o.formula, "Formula file or formula text")->required();
  tableau->add_option("--graph", o.graph, "Unwind over this graph and negate before building");
  tableau->add_flag("--negate", o.negate, "Negate the formula before building");
  add_common(tableau);

  auto* group = app.add_subcommand("group", "Group processes and assign sub-formulas");
  group->add_option("--formula", o.formula, "Formula file or formula text")->required();
  group->add_option("--graph", o.graph, "Dependency graph JSON")->required();
  add_common(group);

  auto* simulate = app.add_subcommand("simulate", "Run a scenario with monitors in lockstep");
  simulate->add_option("--scenario", o.scenario, "Scenario JSON, or sorting_line / sorting_line_blue")->required();
  simulate->add_option("--rounds", o.rounds, "Number of rounds");
  simulate->add_option("--fault", o.faults, "KIND[+N]@ROUND[:TARGET], repeatable");
  simulate->add_option("--seed", o.seed, "Override the scenario seed");
  add_common(simulate);

  auto* check = app.add_subcommand("check", "Compare decentralized and centralized verdicts");
  check->add_option("--scenario", o.scenario, "Scenario JSON, or sorting_line / sorting_line_blue")->required();
  check->add_option("--formula", o.formula, "Override the scenario property");
  check->add_option("--graph", o.graph, "Override the scenario graph");
  check->add_option("--rounds", o.rounds, "Number of rounds");
  check->add_option("--fault", o.faults, "KIND[+N]@ROUND[:TARGET], repeatable");
  check->add_option("--seed", o.seed, "Override the scenario seed");
  add_common(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const std::string tableau_default = tableau->count("--format") ? o.format : "dot";
  try {
    if (*parse) return cmd_parse(o);
    if (*unwind_cmd) return cmd_unwind(o);
    if (*tableau) {
      Options t = o;
      t.format = tableau_default;
      return cmd_tableau(t);
    }
    if (*group) return cmd_group(o);
    if (*simulate) return cmd_simulate(o);
    if (*check) return cmd_check(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const InfeasibleConstraint& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const UnwindError& e) {
    std::cerr << "unwind error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const GroupingError& e) {
    std::cerr << "unobservable: " << e.what() << "\n";
    return kUnobservable;
  } catch (const MonitorError& e) {
    std::cerr << "unobservable: " << e.what() << "\n";
    return kUnobservable;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGraph;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kGraph;
  }
  return kUsage;
}
