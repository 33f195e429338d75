#pragma once

#include "ccmon/monitor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ccmon {

class ScenarioError : public Error {
 public:
  using Error::Error;
};

enum class FaultKind { Drop, Delay, TriggerFailure, LostStepCount, OutputDelay, ArrivalFailure };

std::string_view to_string(FaultKind k) noexcept;
FaultKind fault_kind_from_string(const std::string& s);
/// Delay and OutputDelay postpone the output; every other kind removes it.
bool delays(FaultKind k) noexcept;

struct FaultSpec {
  FaultKind kind = FaultKind::Drop;
  /// Output variable, or a pid meaning its first output. Empty picks the
  /// scenario's default target for the kind.
  std::string target;
  /// The first production of the target at or after this round is hit.
  std::size_t at_round = 0;
  /// Extra rounds for delaying kinds.
  Cost extra = 0;
};

enum class RecoveryKind { EjectToBin3, ReferenceSecondSensor, ReduceBeltSpeed };

std::string_view to_string(RecoveryKind k) noexcept;
RecoveryKind recovery_kind_from_string(const std::string& s);

struct RecoveryAction {
  RecoveryKind kind = RecoveryKind::EjectToBin3;
  /// ReduceBeltSpeed: the rounds left before the ejection deadline are
  /// multiplied by this.
  Cost factor = 2;
};

struct OutputRule {
  /// Inputs that must all be present; empty means every input.
  std::vector<std::string> trigger;
  std::optional<Cost> latency;
};

struct Behavior {
  /// Rounds from the last required input to the output.
  Cost latency = 0;
  /// Seeded extra rounds in [0, jitter].
  Cost jitter = 0;
  std::map<std::string, OutputRule> outputs;
};

struct Stimulus {
  std::size_t round = 0;
  std::vector<std::string> vars;
};

/// Belt and ejectors. Bin outputs fire only if their inputs arrived by the
/// ejection deadline, which is counted from the first stimulus.
struct Transport {
  std::size_t eject_after = 3;
  std::map<std::string, int> bins;
  int fallback_bin = 3;
};

/// A monitor placed by hand instead of by grouping.
struct MonitorEntry {
  std::string name;
  std::string pid;
  /// The QDep watched, anchored at the root trigger.
  Formula qdep;
};

struct Baseline {
  std::string pid;
  Formula formula;
};

struct Scenario {
  std::string name;
  DependencyGraph graph;
  Formula property;
  std::map<std::string, Behavior> behaviors;
  std::vector<Stimulus> stimuli;
  std::vector<FaultSpec> faults;
  std::map<FaultKind, RecoveryAction> recoveries;
  std::map<FaultKind, std::string> fault_defaults;
  std::uint64_t seed = 0;
  std::size_t rounds = 20;
  std::optional<Transport> transport;
  std::vector<MonitorEntry> monitor_table;
  std::optional<Baseline> baseline;
  /// Replaces the budget of a process's unwound conjunct.
  std::map<std::string, Cost> constraint_overrides;

  /// Throws ScenarioError naming the first problem.
  void validate() const;
  /// Fills in the default target of a fault.
  FaultSpec resolve(FaultSpec f) const;
};

struct RecoveryRecord {
  std::size_t round = 0;
  FaultSpec fault;
  RecoveryAction action;
  std::string monitor;
  Formula formula;
};

struct Detection {
  std::string monitor;
  std::string pid;
  Formula formula;
  std::size_t round = 0;
};

struct SimulationResult {
  std::map<std::string, Trace> per_process_traces;
  Trace global_trace;
  MonitorReport report;
  /// Violations in the order they happened, one per monitor.
  std::vector<Detection> detections;
  std::optional<std::size_t> baseline_detection;
  std::vector<RecoveryRecord> recovery_log;
  /// Round at which each fault actually hit, in fault order.
  std::vector<std::optional<std::size_t>> manifested;
  /// Bin the token ended in; 0 if it never arrived anywhere.
  std::optional<int> bin;
  /// Last round at which the property's trigger held.
  std::optional<std::size_t> last_trigger_round;

  std::optional<std::size_t> detection_of(const std::string& monitor) const;
};

/// The monitors a scenario runs: the hand-placed table when present,
/// otherwise the grouping of the unwound property.
struct ScenarioMonitors {
  std::vector<LocalMonitor> monitors;
  std::vector<std::string> names;
  /// QDep each monitor watches, used to designate monitors for faults.
  std::vector<Formula> watched;
  SubformulaIndex index;
};

ScenarioMonitors scenario_monitors(const Scenario& s);

SimulationResult run_simulation(const Scenario& s);
SimulationResult run_simulation(const Scenario& s, std::size_t rounds);

enum class TokenColor { White, Blue };

Scenario build_sorting_line_scenario(TokenColor color = TokenColor::White);

struct RandomLimits {
  std::size_t max_processes = 6;
  std::size_t max_fanout = 2;
  Cost max_cost = 2;
  std::size_t max_rounds = 20;
};

Scenario random_scenario(std::uint64_t seed, const RandomLimits& limits = {});

/// Each process's round-by-round events merged into one: union of the
/// propositions, cost 1 per round.
Trace merge_traces(const std::map<std::string, Trace>& per_process, std::size_t rounds);

Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario_file(const std::string& path);

nlohmann::json trace_log_json(const SimulationResult& r);
nlohmann::json recovery_log_json(const SimulationResult& r);

}  // namespace ccmon
