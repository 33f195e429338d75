#pragma once

#include "ccmon/formula.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ccmon {

class GraphError : public Error {
 public:
  using Error::Error;
};

struct Process {
  std::string pid;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  /// Lower bound on the cost of producing the outputs.
  Cost cost = 0;

  /// Local alphabet: inputs and outputs.
  std::set<std::string> alphabet() const;
  bool reads(const std::string& v) const;
  bool writes(const std::string& v) const;
};

enum class ProcessRole { Source, Intermediate, Sink };

std::string_view to_string(ProcessRole r) noexcept;

/// Orders pids so that embedded numbers compare numerically (p2 < p10).
bool natural_less(const std::string& a, const std::string& b);

struct DependencyPath {
  std::vector<Process> procs;

  std::vector<std::string> pids() const;
  bool empty() const noexcept { return procs.empty(); }
};

Cost path_cost(const DependencyPath& p);

class DependencyGraph {
 public:
  DependencyGraph() = default;
  /// Builds the wiring indices. Does not validate; call validate().
  explicit DependencyGraph(std::vector<Process> processes,
                           std::optional<std::set<std::string>> declared_environment = std::nullopt);

  /// Throws GraphError naming the first violated invariant.
  void validate() const;

  const std::vector<Process>& processes() const noexcept { return processes_; }
  bool has_process(const std::string& pid) const;
  const Process& process(const std::string& pid) const;

  /// Producer pid of a dependent variable; nullopt for environment variables.
  std::optional<std::string> producer(const std::string& v) const;
  bool is_environment(const std::string& v) const;
  std::set<std::string> environment() const;
  std::set<std::string> dependent() const;
  std::set<std::string> variables() const;
  const std::optional<std::set<std::string>>& declared_environment() const noexcept { return declared_env_; }

  /// (producer, consumer) pairs with OUT(producer) ∩ IN(consumer) ≠ ∅.
  std::set<std::pair<std::string, std::string>> edges() const;
  std::vector<std::string> successors(const std::string& pid) const;
  std::vector<std::string> predecessors(const std::string& pid) const;
  std::vector<std::string> consumers(const std::string& v) const;

  ProcessRole classify(const std::string& pid) const;
  /// Producers before consumers, ties by natural pid order.
  std::vector<std::string> topological_order() const;

  /// Every simple path ending at producer(v), lexicographic by pid sequence.
  std::vector<DependencyPath> dependency_paths(const std::string& v) const;
  /// Paths from `pid` to producer(v).
  std::vector<DependencyPath> paths_from(const std::string& pid, const std::string& v) const;

 private:
  std::vector<Process> processes_;
  std::map<std::string, std::size_t> by_pid_;
  std::multimap<std::string, std::string> producers_;
  std::optional<std::set<std::string>> declared_env_;
};

DependencyGraph graph_from_json(const nlohmann::json& doc);
nlohmann::json graph_to_json(const DependencyGraph& g);
/// Parses and validates a JSON graph document.
DependencyGraph load_graph(const std::string& text);
DependencyGraph load_graph_file(const std::string& path);

}  // namespace ccmon
