#pragma once

#include "ccmon/graph.hpp"
#include "ccmon/tableau.hpp"
#include "ccmon/unwind.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

namespace ccmon {

class GroupingError : public Error {
 public:
  using Error::Error;
};

struct MonitorGroup {
  std::set<std::string> members;
  /// Disjunction of the branch formulas merged into this group.
  Formula formula;
  /// Members in ascending pid order; messages travel along it.
  std::vector<std::string> comm_order;
};

/// Groups processes by the ticked branches of `t`.
///
/// A branch is watched by the processes whose alphabet covers all of its
/// atoms, or by every process that sees one of them if none does. Groups
/// that share a process are merged until no two overlap.
std::vector<MonitorGroup> organize_groups(const std::vector<Process>& procs, const Tableau& t);

/// Per-process share of the group formulas: each F !(L o<=c v) or QDep
/// disjunct goes to the member producing v. Disjuncts given to the same
/// process are joined with |.
std::map<std::string, Formula> assign_conjuncts(const std::vector<MonitorGroup>& groups, const UnwoundFormula& u,
                                                const DependencyGraph& g);

nlohmann::json groups_to_json(const std::vector<MonitorGroup>& groups, const std::map<std::string, Formula>& assigned,
                              const UnwoundFormula& u);

}  // namespace ccmon
