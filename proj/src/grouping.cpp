#include "ccmon/grouping.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace ccmon {

namespace {

std::vector<std::string> natural_sorted(const std::set<std::string>& s) {
  std::vector<std::string> out(s.begin(), s.end());
  std::sort(out.begin(), out.end(), natural_less);
  return out;
}

bool overlaps(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::any_of(a.begin(), a.end(), [&](const std::string& x) { return b.count(x) != 0; });
}

std::set<std::string> watchers(const std::vector<Process>& procs, const std::set<std::string>& atoms) {
  std::set<std::string> covering, touching;
  for (const Process& p : procs) {
    const auto alpha = p.alphabet();
    if (std::includes(alpha.begin(), alpha.end(), atoms.begin(), atoms.end())) covering.insert(p.pid);
    if (overlaps(alpha, atoms)) touching.insert(p.pid);
  }
  return covering.empty() ? touching : covering;
}

MonitorGroup finish(std::set<std::string> members, Formula f) {
  MonitorGroup g;
  g.comm_order = natural_sorted(members);
  g.members = std::move(members);
  g.formula = std::move(f);
  return g;
}

// The QDep a disjunct is about: F !(q), !(q) or q itself.
const Formula* qdep_of(const Formula& f) {
  const Formula* x = &f;
  if (x->is(Kind::Eventually)) x = &x->lhs();
  if (x->is(Kind::Not)) x = &x->lhs();
  return x->is(Kind::QDep) ? x : nullptr;
}

}  // namespace

std::vector<MonitorGroup> organize_groups(const std::vector<Process>& procs, const Tableau& t) {
  if (t.size() == 0) throw GroupingError("empty tableau");
  const auto branches = t.branches();
  if (branches.size() == 1) {
    std::set<std::string> all;
    for (const Process& p : procs) all.insert(p.pid);
    return {finish(std::move(all), t.root().label.front().formula)};
  }

  std::set<std::string> observable;
  for (const Process& p : procs)
    for (const std::string& v : p.alphabet()) observable.insert(v);

  std::vector<MonitorGroup> groups;
  for (const Branch& b : branches) {
    if (b.outcome != NodeStatus::Ticked) continue;
    const Formula phi = make_chain(terminal_node(t, b), Kind::And);
    const auto names = atoms(phi);
    if (names.empty()) continue;  // nothing any process could observe
    for (const std::string& a : names)
      if (!observable.count(a)) throw GroupingError("atom " + a + " is not observed by any process");
    groups.push_back(finish(watchers(procs, names), phi));
  }

  // Merge to a fixpoint: a single pass misses chains of overlaps.
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t i = 0; i < groups.size() && !merged; ++i)
      for (std::size_t j = i + 1; j < groups.size() && !merged; ++j) {
        if (!overlaps(groups[i].members, groups[j].members)) continue;
        std::set<std::string> m = groups[i].members;
        m.insert(groups[j].members.begin(), groups[j].members.end());
        groups[i] = finish(std::move(m), simplify_or(groups[i].formula, groups[j].formula));
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
  }

  std::stable_sort(groups.begin(), groups.end(), [](const MonitorGroup& a, const MonitorGroup& b) {
    return natural_less(a.comm_order.front(), b.comm_order.front());
  });
  return groups;
}

std::map<std::string, Formula> assign_conjuncts(const std::vector<MonitorGroup>& groups, const UnwoundFormula& u,
                                                const DependencyGraph& g) {
  std::map<std::string, Formula> out;
  for (const MonitorGroup& grp : groups) {
    for (const Formula& d : flatten(grp.formula, Kind::Or)) {
      for (const Formula& part : flatten(d, Kind::And)) {
        const Formula* q = qdep_of(part);
        if (!q) continue;
        std::optional<std::string> owner;
        for (const UnwoundConjunct& c : u.conjuncts)
          if (c.qdep == *q && grp.members.count(c.pid)) owner = c.pid;
        if (!owner)
          for (const std::string& v : atoms(q->rhs())) {
            const auto p = g.producer(v);
            if (p && grp.members.count(*p)) {
              owner = p;
              break;
            }
          }
        if (!owner) throw GroupingError("no member of the group produces " + render_formula(q->rhs()) + " in " +
                                        render_formula(part));
        auto it = out.find(*owner);
        if (it == out.end()) out.emplace(*owner, part);
        else it->second = simplify_or(it->second, part);
      }
    }
  }
  return out;
}

nlohmann::json groups_to_json(const std::vector<MonitorGroup>& groups, const std::map<std::string, Formula>& assigned,
                              const UnwoundFormula& u) {
  nlohmann::json arr = nlohmann::json::array();
  for (const MonitorGroup& grp : groups) {
    nlohmann::json procs = nlohmann::json::array();
    for (const std::string& pid : grp.comm_order) {
      nlohmann::json p{{"pid", pid}};
      if (auto it = assigned.find(pid); it != assigned.end()) {
        p["formula"] = render_formula(it->second);
        nlohmann::json cs = nlohmann::json::array();
        for (const UnwoundConjunct& c : u.conjuncts)
          if (c.pid == pid) cs.push_back({{"qdep", render_formula(c.qdep)}, {"constraint", c.constraint}});
        p["constraints"] = cs;
      }
      procs.push_back(p);
    }
    arr.push_back({{"members", grp.comm_order}, {"formula", render_formula(grp.formula)}, {"processes", procs}});
  }
  return nlohmann::json{{"groups", arr}};
}

}  // namespace ccmon
