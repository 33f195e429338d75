#pragma once

#include "ccmon/grouping.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ccmon {

class MonitorError : public Error {
 public:
  using Error::Error;
};

struct MonitorMessage {
  std::size_t idx = 0;
  Verdict val = Verdict::Unknown;
  std::size_t round = 0;
  std::string from;
  std::string to;
};

struct LocalMonitor {
  std::string pid;
  /// Share of the negated property this process watches.
  Formula assigned;
  /// Residual of `assigned` after the rounds seen so far.
  Formula residual;
  Verdict verdict = Verdict::Unknown;
  std::optional<std::size_t> decided_round;
  /// Group members in message order; this monitor sends to its successor.
  std::vector<std::string> comm_order;
  /// Atoms of `assigned` this process cannot see and must hear about.
  std::set<std::string> remote;
  /// Last value heard for each remote atom.
  std::map<std::string, bool> heard;
  std::vector<MonitorMessage> inbox;
  std::vector<MonitorMessage> outbox;

  /// Budgets currently being tracked inside the residual, with their
  /// remaining cost.
  std::vector<std::pair<Formula, Cost>> obligations() const;
};

struct MonitorConfig {
  ProgressOptions progress{1};
};

/// One monitor per process owning part of the negated property. A group
/// without assigned conjuncts (the single-branch case) hands its whole
/// formula to every member.
std::vector<LocalMonitor> synthesize_monitors(const std::vector<MonitorGroup>& groups,
                                              const std::map<std::string, Formula>& assignment,
                                              const DependencyGraph& g, SubformulaIndex& index);

struct RoundResult {
  std::vector<MonitorMessage> messages;
  /// Verdict for the monitored property once it is final.
  std::optional<Verdict> global;
};

/// One synchronous round. `events` must hold an event for every monitored
/// pid. Atom values travel once around each group's ring, and a value is only
/// announced when it differs from what the receiver last heard.
RoundResult monitor_round(std::vector<LocalMonitor>& monitors, const std::map<std::string, Event>& events,
                          std::size_t round, const DependencyGraph& g, const SubformulaIndex& index,
                          const MonitorConfig& config = {});

/// Verdict on the property from the verdicts of the negated shares: any share
/// that holds falsifies it, all shares failing satisfies it.
Verdict aggregate_verdict(const std::vector<Verdict>& local);

struct MonitorReport {
  Verdict global_verdict = Verdict::Unknown;
  std::optional<std::string> detecting_pid;
  std::optional<std::size_t> detection_round;
  std::size_t rounds = 0;
  std::vector<std::size_t> messages_per_round;
  std::map<std::string, std::vector<Verdict>> verdict_history;

  std::size_t total_messages() const;
};

MonitorReport run_decentralized(const std::map<std::string, Trace>& traces, std::vector<LocalMonitor> monitors,
                                const DependencyGraph& g, const SubformulaIndex& index,
                                const MonitorConfig& config = {});

/// Single monitor over the merged trace.
MonitorReport run_centralized(const Formula& property, const Trace& global, const MonitorConfig& config = {});

/// Everything from the property to the monitors in one call.
struct MonitorSetup {
  UnwoundFormula unwound;
  Formula negated;
  Tableau tableau;
  std::vector<MonitorGroup> groups;
  std::map<std::string, Formula> assignment;
  SubformulaIndex index;
  std::vector<LocalMonitor> monitors;
};

MonitorSetup prepare_monitors(const Formula& property, const DependencyGraph& g);

nlohmann::json report_to_json(const MonitorReport& r);

}  // namespace ccmon
