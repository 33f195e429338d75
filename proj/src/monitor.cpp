#include "ccmon/monitor.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace ccmon {

namespace {

void collect_budgets(const Formula& f, std::vector<std::pair<Formula, Cost>>& out) {
  switch (f.kind()) {
    case Kind::True:
    case Kind::False:
    case Kind::Atom: return;
    case Kind::Budget:
      out.emplace_back(f.lhs(), f.bound());
      collect_budgets(f.lhs(), out);
      return;
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
    case Kind::QDep:
      collect_budgets(f.lhs(), out);
      collect_budgets(f.rhs(), out);
      return;
    default: collect_budgets(f.lhs(), out); return;
  }
}

bool decided(Verdict v) { return v != Verdict::Unknown; }

Verdict constant_verdict(const Formula& f) {
  if (f.is(Kind::True)) return Verdict::True;
  if (f.is(Kind::False)) return Verdict::False;
  return Verdict::Unknown;
}

// Member of the ring that observes `atom`, preferring its producer.
std::optional<std::size_t> owner_position(const std::vector<std::string>& ring, const std::string& atom,
                                          const DependencyGraph& g) {
  if (auto p = g.producer(atom)) {
    auto it = std::find(ring.begin(), ring.end(), *p);
    if (it != ring.end()) return static_cast<std::size_t>(it - ring.begin());
  }
  for (std::size_t k = 0; k < ring.size(); ++k)
    if (g.has_process(ring[k]) && g.process(ring[k]).alphabet().count(atom)) return k;
  return std::nullopt;
}

}  // namespace

std::vector<std::pair<Formula, Cost>> LocalMonitor::obligations() const {
  std::vector<std::pair<Formula, Cost>> out;
  collect_budgets(residual, out);
  return out;
}

std::vector<LocalMonitor> synthesize_monitors(const std::vector<MonitorGroup>& groups,
                                              const std::map<std::string, Formula>& assignment,
                                              const DependencyGraph& g, SubformulaIndex& index) {
  std::vector<LocalMonitor> out;
  auto make = [&](const std::string& pid, const Formula& f, const MonitorGroup& grp) {
    LocalMonitor m;
    m.pid = pid;
    m.assigned = f;
    m.residual = f;
    m.comm_order = grp.comm_order;
    const auto alpha = g.process(pid).alphabet();
    for (const std::string& a : atoms(f))
      if (!alpha.count(a)) m.remote.insert(a);
    index.extend(f);
    out.push_back(std::move(m));
  };
  for (const MonitorGroup& grp : groups) {
    const bool owned = std::any_of(grp.comm_order.begin(), grp.comm_order.end(),
                                   [&](const std::string& pid) { return assignment.count(pid) != 0; });
    for (const std::string& pid : grp.comm_order) {
      if (!owned) make(pid, grp.formula, grp);
      else if (auto it = assignment.find(pid); it != assignment.end()) make(pid, it->second, grp);
    }
  }
  return out;
}

RoundResult monitor_round(std::vector<LocalMonitor>& monitors, const std::map<std::string, Event>& events,
                          std::size_t round, const DependencyGraph& g, const SubformulaIndex& index,
                          const MonitorConfig& config) {
  RoundResult result;
  for (LocalMonitor& m : monitors) {
    m.inbox.clear();
    m.outbox.clear();
    if (!events.count(m.pid)) throw MonitorError("no event for " + m.pid + " in round " + std::to_string(round));
  }

  // Observation exchange. Each needed remote atom travels from its owner along
  // the ring up to the farthest monitor that needs it, and only when its value
  // changed since it was last announced.
  std::map<std::vector<std::string>, std::vector<LocalMonitor*>> rings;
  for (LocalMonitor& m : monitors) rings[m.comm_order].push_back(&m);
  for (auto& [ring, members] : rings) {
    std::set<std::string> needed;
    for (LocalMonitor* m : members) needed.insert(m->remote.begin(), m->remote.end());
    for (const std::string& a : needed) {
      const auto own = owner_position(ring, a, g);
      if (!own) throw MonitorError("no process of the group observes " + a);
      const auto& src = events.find(ring[*own]);
      const bool value = src != events.end() && src->second.holds(a);
      std::size_t reach = 0;
      bool changed = false;
      for (LocalMonitor* m : members) {
        if (!m->remote.count(a)) continue;
        const auto pos = static_cast<std::size_t>(std::find(ring.begin(), ring.end(), m->pid) - ring.begin());
        reach = std::max(reach, (pos + ring.size() - *own) % ring.size());
        auto it = m->heard.find(a);
        if ((it == m->heard.end() ? false : it->second) != value) changed = true;
      }
      if (!changed) continue;
      const std::size_t idx = index.at(Formula::atom(a));
      const Verdict val = value ? Verdict::True : Verdict::False;
      for (std::size_t hop = 1; hop <= reach; ++hop) {
        const std::string& from = ring[(*own + hop - 1) % ring.size()];
        const std::string& to = ring[(*own + hop) % ring.size()];
        MonitorMessage msg{idx, val, round, from, to};
        for (LocalMonitor* m : members) {
          if (m->pid == from) m->outbox.push_back(msg);
          if (m->pid == to) m->inbox.push_back(msg);
        }
        result.messages.push_back(msg);
      }
    }
  }

  for (LocalMonitor& m : monitors) {
    for (const MonitorMessage& msg : m.inbox) {
      if (!index.contains(msg.idx)) throw MonitorError("message for unknown index " + std::to_string(msg.idx));
      const Formula& f = index.formula(msg.idx);
      if (f.is(Kind::Atom) && m.remote.count(f.name())) m.heard[f.name()] = msg.val == Verdict::True;
    }
    if (decided(m.verdict)) continue;
    Event e = events.at(m.pid);
    for (const std::string& a : m.remote) {
      e.props.erase(a);
      if (auto it = m.heard.find(a); it != m.heard.end() && it->second) e.props.insert(a);
    }
    m.residual = progress(m.residual, e, 0, config.progress);
    m.verdict = constant_verdict(m.residual);
    if (decided(m.verdict)) m.decided_round = round;
  }

  std::vector<Verdict> local;
  for (const LocalMonitor& m : monitors) local.push_back(m.verdict);
  const Verdict v = aggregate_verdict(local);
  if (decided(v)) result.global = v;
  return result;
}

Verdict aggregate_verdict(const std::vector<Verdict>& local) {
  if (std::any_of(local.begin(), local.end(), [](Verdict v) { return v == Verdict::True; })) return Verdict::False;
  if (!local.empty() && std::all_of(local.begin(), local.end(), [](Verdict v) { return v == Verdict::False; }))
    return Verdict::True;
  return Verdict::Unknown;
}

std::size_t MonitorReport::total_messages() const {
  std::size_t n = 0;
  for (std::size_t k : messages_per_round) n += k;
  return n;
}

MonitorReport run_decentralized(const std::map<std::string, Trace>& traces, std::vector<LocalMonitor> monitors,
                                const DependencyGraph& g, const SubformulaIndex& index, const MonitorConfig& config) {
  MonitorReport r;
  std::optional<std::size_t> length;
  for (const auto& [pid, t] : traces) {
    if (length && *length != t.size()) throw MonitorError("trace of " + pid + " has a different length");
    length = t.size();
  }
  for (const LocalMonitor& m : monitors) {
    if (!traces.count(m.pid)) throw MonitorError("no trace for " + m.pid);
    r.verdict_history[m.pid];
  }
  if (monitors.empty() || !length) return r;

  for (std::size_t k = 0; k < *length; ++k) {
    std::map<std::string, Event> events;
    for (const auto& [pid, t] : traces) events.emplace(pid, t.events[k]);
    std::vector<Verdict> before;
    for (const LocalMonitor& m : monitors) before.push_back(m.verdict);
    RoundResult rr = monitor_round(monitors, events, k, g, index, config);
    r.rounds = k + 1;
    r.messages_per_round.push_back(rr.messages.size());
    for (const LocalMonitor& m : monitors) r.verdict_history[m.pid].push_back(m.verdict);
    if (!rr.global) continue;
    r.global_verdict = *rr.global;
    r.detection_round = k;
    for (std::size_t i = 0; i < monitors.size(); ++i)
      if (before[i] == Verdict::Unknown && decided(monitors[i].verdict) &&
          (r.global_verdict != Verdict::False || monitors[i].verdict == Verdict::True)) {
        r.detecting_pid = monitors[i].pid;
        break;
      }
    break;
  }
  return r;
}

MonitorReport run_centralized(const Formula& property, const Trace& global, const MonitorConfig& config) {
  MonitorReport r;
  Formula residual = property;
  auto& history = r.verdict_history["central"];
  for (std::size_t k = 0; k < global.size(); ++k) {
    residual = progress(residual, global.events[k], 0, config.progress);
    r.rounds = k + 1;
    r.messages_per_round.push_back(0);
    const Verdict v = constant_verdict(residual);
    history.push_back(v);
    if (!decided(v)) continue;
    r.global_verdict = v;
    r.detection_round = k;
    r.detecting_pid = "central";
    break;
  }
  return r;
}

MonitorSetup prepare_monitors(const Formula& property, const DependencyGraph& g) {
  MonitorSetup s;
  const auto vars = g.variables();
  for (const std::string& a : atoms(property))
    if (!vars.count(a)) throw GroupingError("atom " + a + " is not observed by any process");
  s.unwound = unwind(property, g);
  s.negated = negate(s.unwound.formula);
  s.tableau = build_tableau(s.negated);
  s.groups = organize_groups(g.processes(), s.tableau);
  s.assignment = assign_conjuncts(s.groups, s.unwound, g);
  s.index = SubformulaIndex(s.negated);
  s.monitors = synthesize_monitors(s.groups, s.assignment, g, s.index);
  return s;
}

nlohmann::json report_to_json(const MonitorReport& r) {
  nlohmann::json j{{"verdict", std::string(to_string(r.global_verdict))},
                   {"rounds", r.rounds},
                   {"messages", r.total_messages()},
                   {"messages_per_round", r.messages_per_round}};
  j["detecting_pid"] = r.detecting_pid ? nlohmann::json(*r.detecting_pid) : nlohmann::json(nullptr);
  j["detection_round"] = r.detection_round ? nlohmann::json(*r.detection_round) : nlohmann::json(nullptr);
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [pid, vs] : r.verdict_history) {
    std::string s;
    for (Verdict v : vs) s += v == Verdict::True ? 'T' : v == Verdict::False ? 'F' : '?';
    hist[pid] = s;
  }
  j["history"] = hist;
  return j;
}

}  // namespace ccmon
