#include "ccmon/graph.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

namespace ccmon {

using nlohmann::json;

std::set<std::string> Process::alphabet() const {
  std::set<std::string> out(inputs.begin(), inputs.end());
  out.insert(outputs.begin(), outputs.end());
  return out;
}

bool Process::reads(const std::string& v) const {
  return std::find(inputs.begin(), inputs.end(), v) != inputs.end();
}

bool Process::writes(const std::string& v) const {
  return std::find(outputs.begin(), outputs.end(), v) != outputs.end();
}

std::string_view to_string(ProcessRole r) noexcept {
  switch (r) {
    case ProcessRole::Source: return "Source";
    case ProcessRole::Intermediate: return "Intermediate";
    case ProcessRole::Sink: return "Sink";
  }
  return "?";
}

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  auto digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  while (i < a.size() && j < b.size()) {
    if (digit(a[i]) && digit(b[j])) {
      std::size_t i2 = i, j2 = j;
      while (i2 < a.size() && digit(a[i2])) ++i2;
      while (j2 < b.size() && digit(b[j2])) ++j2;
      std::string_view na(a.data() + i, i2 - i), nb(b.data() + j, j2 - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = i2;
      j = j2;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

std::vector<std::string> DependencyPath::pids() const {
  std::vector<std::string> out;
  for (const Process& p : procs) out.push_back(p.pid);
  return out;
}

Cost path_cost(const DependencyPath& p) {
  Cost sum = 0;
  for (const Process& q : p.procs) sum += q.cost;
  return sum;
}

DependencyGraph::DependencyGraph(std::vector<Process> processes,
                                 std::optional<std::set<std::string>> declared_environment)
    : processes_(std::move(processes)), declared_env_(std::move(declared_environment)) {
  for (std::size_t i = 0; i < processes_.size(); ++i) {
    by_pid_.emplace(processes_[i].pid, i);
    for (const std::string& v : processes_[i].outputs) producers_.emplace(v, processes_[i].pid);
  }
}

void DependencyGraph::validate() const {
  std::set<std::string> seen;
  for (const Process& p : processes_) {
    if (p.pid.empty()) throw GraphError("process with empty pid");
    if (!seen.insert(p.pid).second) throw GraphError("duplicate pid " + p.pid);
    if (p.cost < 0) throw GraphError("negative cost for process " + p.pid);
    std::set<std::string> ins;
    for (const std::string& v : p.inputs) {
      if (v.empty()) throw GraphError("empty variable name in process " + p.pid);
      if (!ins.insert(v).second) throw GraphError("variable " + v + " listed twice as input of " + p.pid);
    }
    std::set<std::string> outs;
    for (const std::string& v : p.outputs) {
      if (v.empty()) throw GraphError("empty variable name in process " + p.pid);
      if (!outs.insert(v).second) throw GraphError("variable " + v + " listed twice as output of " + p.pid);
      if (ins.count(v)) throw GraphError("cycle: " + p.pid + " -> " + p.pid + " (" + v + " is both input and output)");
    }
  }
  for (auto it = producers_.begin(); it != producers_.end();) {
    auto range = producers_.equal_range(it->first);
    if (std::distance(range.first, range.second) > 1) {
      std::string who;
      for (auto k = range.first; k != range.second; ++k) who += (who.empty() ? "" : ", ") + k->second;
      throw GraphError("variable " + it->first + " has more than one producer: " + who);
    }
    it = range.second;
  }
  if (declared_env_) {
    const std::set<std::string> env = environment();
    for (const std::string& v : *declared_env_) {
      if (producer(v)) throw GraphError("declared environment variable " + v + " is produced by " + *producer(v));
      if (!env.count(v)) throw GraphError("declared environment variable " + v + " is not read by any process");
    }
    for (const std::string& v : env)
      if (!declared_env_->count(v)) throw GraphError("environment variable " + v + " is not declared");
  }

  // Cycle detection with an explicit path for the report.
  std::map<std::string, int> color;
  std::vector<std::string> stack;
  std::function<void(const std::string&)> visit = [&](const std::string& pid) {
    color[pid] = 1;
    stack.push_back(pid);
    for (const std::string& s : successors(pid)) {
      if (color[s] == 1) {
        auto from = std::find(stack.begin(), stack.end(), s);
        std::string cyc;
        for (auto k = from; k != stack.end(); ++k) cyc += *k + " -> ";
        throw GraphError("cycle: " + cyc + s);
      }
      if (color[s] == 0) visit(s);
    }
    stack.pop_back();
    color[pid] = 2;
  };
  for (const Process& p : processes_)
    if (color[p.pid] == 0) visit(p.pid);

  for (const Process& p : processes_)
    if (successors(p.pid).empty() && predecessors(p.pid).empty())
      throw GraphError("isolated process " + p.pid + " has no predecessors and no successors");
}

bool DependencyGraph::has_process(const std::string& pid) const { return by_pid_.count(pid) != 0; }

const Process& DependencyGraph::process(const std::string& pid) const {
  auto it = by_pid_.find(pid);
  if (it == by_pid_.end()) throw GraphError("unknown process " + pid);
  return processes_[it->second];
}

std::optional<std::string> DependencyGraph::producer(const std::string& v) const {
  auto it = producers_.find(v);
  if (it == producers_.end()) return std::nullopt;
  return it->second;
}

bool DependencyGraph::is_environment(const std::string& v) const { return environment().count(v) != 0; }

std::set<std::string> DependencyGraph::environment() const {
  std::set<std::string> out;
  for (const Process& p : processes_)
    for (const std::string& v : p.inputs)
      if (!producers_.count(v)) out.insert(v);
  return out;
}

std::set<std::string> DependencyGraph::dependent() const {
  std::set<std::string> out;
  for (const auto& [v, pid] : producers_) out.insert(v);
  return out;
}

std::set<std::string> DependencyGraph::variables() const {
  std::set<std::string> out = environment();
  for (const auto& [v, pid] : producers_) out.insert(v);
  return out;
}

std::set<std::pair<std::string, std::string>> DependencyGraph::edges() const {
  std::set<std::pair<std::string, std::string>> out;
  for (const Process& c : processes_)
    for (const std::string& v : c.inputs) {
      auto range = producers_.equal_range(v);
      for (auto it = range.first; it != range.second; ++it) out.emplace(it->second, c.pid);
    }
  return out;
}

namespace {

void sort_natural(std::vector<std::string>& v) {
  std::sort(v.begin(), v.end(), natural_less);
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::vector<std::string> DependencyGraph::successors(const std::string& pid) const {
  const Process& p = process(pid);
  std::vector<std::string> out;
  for (const Process& c : processes_)
    for (const std::string& v : p.outputs)
      if (c.reads(v)) out.push_back(c.pid);
  sort_natural(out);
  return out;
}

std::vector<std::string> DependencyGraph::predecessors(const std::string& pid) const {
  const Process& p = process(pid);
  std::vector<std::string> out;
  for (const std::string& v : p.inputs) {
    auto range = producers_.equal_range(v);
    for (auto it = range.first; it != range.second; ++it) out.push_back(it->second);
  }
  sort_natural(out);
  return out;
}

std::vector<std::string> DependencyGraph::consumers(const std::string& v) const {
  std::vector<std::string> out;
  for (const Process& c : processes_)
    if (c.reads(v)) out.push_back(c.pid);
  sort_natural(out);
  return out;
}

ProcessRole DependencyGraph::classify(const std::string& pid) const {
  const bool has_pred = !predecessors(pid).empty();
  const bool has_succ = !successors(pid).empty();
  if (has_pred && has_succ) return ProcessRole::Intermediate;
  if (has_succ) return ProcessRole::Source;
  if (has_pred) return ProcessRole::Sink;
  throw GraphError("isolated process " + pid + " has no predecessors and no successors");
}

std::vector<std::string> DependencyGraph::topological_order() const {
  std::map<std::string, std::size_t> indegree;
  for (const Process& p : processes_) indegree[p.pid] = predecessors(p.pid).size();
  std::vector<std::string> ready, out;
  for (const auto& [pid, d] : indegree)
    if (d == 0) ready.push_back(pid);
  while (!ready.empty()) {
    std::sort(ready.begin(), ready.end(), [](const auto& a, const auto& b) { return natural_less(b, a); });
    std::string pid = ready.back();
    ready.pop_back();
    out.push_back(pid);
    for (const std::string& s : successors(pid))
      if (--indegree[s] == 0) ready.push_back(s);
  }
  if (out.size() != processes_.size()) throw GraphError("cycle in dependency graph");
  return out;
}

namespace {

bool path_less(const DependencyPath& a, const DependencyPath& b) {
  return std::lexicographical_compare(a.procs.begin(), a.procs.end(), b.procs.begin(), b.procs.end(),
                                      [](const Process& x, const Process& y) { return natural_less(x.pid, y.pid); });
}

}  // namespace

std::vector<DependencyPath> DependencyGraph::paths_from(const std::string& pid, const std::string& v) const {
  process(pid);
  const auto target = producer(v);
  if (!target) return {};
  std::vector<DependencyPath> out;
  DependencyPath cur;
  std::function<void(const std::string&)> walk = [&](const std::string& at) {
    if (std::any_of(cur.procs.begin(), cur.procs.end(), [&](const Process& p) { return p.pid == at; })) return;
    cur.procs.push_back(process(at));
    if (at == *target) out.push_back(cur);
    else
      for (const std::string& s : successors(at)) walk(s);
    cur.procs.pop_back();
  };
  walk(pid);
  std::sort(out.begin(), out.end(), path_less);
  return out;
}

std::vector<DependencyPath> DependencyGraph::dependency_paths(const std::string& v) const {
  const auto target = producer(v);
  if (!target) return {};
  std::vector<DependencyPath> out;
  for (const Process& p : processes_)
    for (DependencyPath& path : paths_from(p.pid, v)) out.push_back(std::move(path));
  std::sort(out.begin(), out.end(), path_less);
  return out;
}

// ---------------------------------------------------------------------------
// JSON documents

namespace {

std::vector<std::string> names(const json& j, const std::string& where) {
  if (!j.is_array()) throw GraphError(where + " must be a list of names");
  std::vector<std::string> out;
  for (const json& v : j) {
    if (!v.is_string()) throw GraphError(where + " must contain strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
      throw GraphError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

DependencyGraph graph_from_json(const json& doc) {
  if (!doc.is_object()) throw GraphError("graph document must be an object");
  reject_unknown(doc, {"processes", "environment", "name", "description"}, "graph");
  if (!doc.contains("processes")) throw GraphError("graph document needs 'processes'");
  const json& ps = doc.at("processes");
  if (!ps.is_array()) throw GraphError("'processes' must be a list");
  std::vector<Process> procs;
  for (const json& p : ps) {
    if (!p.is_object()) throw GraphError("process entry must be an object");
    reject_unknown(p, {"pid", "inputs", "outputs", "cost"}, "process");
    for (const char* key : {"pid", "inputs", "outputs", "cost"})
      if (!p.contains(key)) throw GraphError(std::string("process entry needs '") + key + "'");
    Process proc;
    if (!p.at("pid").is_string()) throw GraphError("pid must be a string");
    proc.pid = p.at("pid").get<std::string>();
    proc.inputs = names(p.at("inputs"), "inputs of " + proc.pid);
    proc.outputs = names(p.at("outputs"), "outputs of " + proc.pid);
    if (!p.at("cost").is_number_integer()) throw GraphError("cost of " + proc.pid + " must be an integer");
    proc.cost = p.at("cost").get<Cost>();
    procs.push_back(std::move(proc));
  }
  std::optional<std::set<std::string>> env;
  if (doc.contains("environment")) {
    auto list = names(doc.at("environment"), "environment");
    env = std::set<std::string>(list.begin(), list.end());
  }
  return DependencyGraph(std::move(procs), std::move(env));
}

json graph_to_json(const DependencyGraph& g) {
  json ps = json::array();
  for (const Process& p : g.processes())
    ps.push_back({{"pid", p.pid}, {"inputs", p.inputs}, {"outputs", p.outputs}, {"cost", p.cost}});
  json doc{{"processes", ps}};
  if (g.declared_environment()) doc["environment"] = *g.declared_environment();
  return doc;
}

DependencyGraph load_graph(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw GraphError(std::string("malformed graph document: ") + e.what());
  }
  DependencyGraph g = graph_from_json(doc);
  g.validate();
  return g;
}

DependencyGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open graph file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_graph(ss.str());
}

}  // namespace ccmon
