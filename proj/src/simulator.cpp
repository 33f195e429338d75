#include "ccmon/simulator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace ccmon {

namespace {

constexpr std::array<std::pair<FaultKind, std::string_view>, 6> kFaultNames{{
    {FaultKind::Drop, "drop"},
    {FaultKind::Delay, "delay"},
    {FaultKind::TriggerFailure, "trigger_failure"},
    {FaultKind::LostStepCount, "lost_step_count"},
    {FaultKind::OutputDelay, "output_delay"},
    {FaultKind::ArrivalFailure, "arrival_failure"},
}};

constexpr std::array<std::pair<RecoveryKind, std::string_view>, 3> kRecoveryNames{{
    {RecoveryKind::EjectToBin3, "eject_to_bin3"},
    {RecoveryKind::ReferenceSecondSensor, "reference_second_sensor"},
    {RecoveryKind::ReduceBeltSpeed, "reduce_belt_speed"},
}};

Formula with_bound(const Formula& f, Cost c) {
  switch (f.kind()) {
    case Kind::True:
    case Kind::False:
    case Kind::Atom:
    case Kind::Budget: return f;
    case Kind::QDep: return Formula::qdep(f.lhs(), f.rhs(), c);
    case Kind::Not: return Formula::negation(with_bound(f.lhs(), c));
    case Kind::Next: return Formula::next(with_bound(f.lhs(), c));
    case Kind::Eventually: return Formula::eventually(with_bound(f.lhs(), c));
    case Kind::Globally: return Formula::globally(with_bound(f.lhs(), c));
    case Kind::And: return Formula::conj(with_bound(f.lhs(), c), with_bound(f.rhs(), c));
    case Kind::Or: return Formula::disj(with_bound(f.lhs(), c), with_bound(f.rhs(), c));
    case Kind::Until: return Formula::until(with_bound(f.lhs(), c), with_bound(f.rhs(), c));
  }
  return f;
}

Formula first_qdep(const Formula& f) {
  auto qs = extract_qdep(f);
  if (qs.empty()) return f;
  return Formula::qdep(qs.front().lhs, qs.front().rhs, qs.front().bound);
}

}  // namespace

std::string_view to_string(FaultKind k) noexcept {
  for (const auto& [kind, name] : kFaultNames)
    if (kind == k) return name;
  return "drop";
}

FaultKind fault_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kFaultNames)
    if (name == s) return kind;
  throw ScenarioError("unknown fault kind '" + s + "'");
}

bool delays(FaultKind k) noexcept { return k == FaultKind::Delay || k == FaultKind::OutputDelay; }

std::string_view to_string(RecoveryKind k) noexcept {
  for (const auto& [kind, name] : kRecoveryNames)
    if (kind == k) return name;
  return "eject_to_bin3";
}

RecoveryKind recovery_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kRecoveryNames)
    if (name == s) return kind;
  throw ScenarioError("unknown recovery action '" + s + "'");
}

FaultSpec Scenario::resolve(FaultSpec f) const {
  if (f.target.empty()) {
    auto it = fault_defaults.find(f.kind);
    if (it == fault_defaults.end())
      throw ScenarioError("fault " + std::string(to_string(f.kind)) + " needs a target");
    f.target = it->second;
  }
  if (graph.has_process(f.target)) {
    const Process& p = graph.process(f.target);
    if (p.outputs.empty()) throw ScenarioError("process " + f.target + " has no output to fault");
    f.target = p.outputs.front();
  }
  if (!graph.producer(f.target)) throw ScenarioError("fault target " + f.target + " is not a process output");
  if (delays(f.kind) && f.extra <= 0) f.extra = f.kind == FaultKind::OutputDelay ? 2 : 1;
  if (!delays(f.kind)) f.extra = 0;
  return f;
}

void Scenario::validate() const {
  graph.validate();
  if (rounds == 0) throw ScenarioError("scenario needs at least one round");
  const auto vars = graph.variables();
  for (const std::string& a : atoms(property))
    if (!vars.count(a)) throw ScenarioError("property atom " + a + " is not a graph variable");
  for (const auto& [pid, b] : behaviors) {
    if (!graph.has_process(pid)) throw ScenarioError("behavior for unknown process " + pid);
    if (b.latency < 0 || b.jitter < 0) throw ScenarioError("negative latency for " + pid);
    const Process& p = graph.process(pid);
    for (const auto& [out, rule] : b.outputs) {
      if (!p.writes(out)) throw ScenarioError(pid + " does not produce " + out);
      for (const std::string& v : rule.trigger)
        if (!p.reads(v)) throw ScenarioError(pid + " does not read " + v);
      if (rule.latency && *rule.latency < 0) throw ScenarioError("negative latency for " + out);
    }
  }
  for (const Stimulus& st : stimuli)
    for (const std::string& v : st.vars)
      if (!graph.is_environment(v) || !vars.count(v)) throw ScenarioError("stimulus " + v + " is not an environment input");
  for (const FaultSpec& f : faults) (void)resolve(f);
  for (const auto& [kind, a] : recoveries)
    if (a.factor < 1) throw ScenarioError("belt slowdown factor must be at least 1");
  for (const MonitorEntry& m : monitor_table) {
    if (!graph.has_process(m.pid)) throw ScenarioError("monitor " + m.name + " sits on unknown process " + m.pid);
    if (!m.qdep.is(Kind::QDep)) throw ScenarioError("monitor " + m.name + " must watch a QDep");
    for (const std::string& a : atoms(m.qdep))
      if (!vars.count(a)) throw ScenarioError("monitor " + m.name + " uses unknown variable " + a);
  }
  if (baseline && !graph.has_process(baseline->pid)) throw ScenarioError("baseline on unknown process " + baseline->pid);
  for (const auto& [pid, c] : constraint_overrides) {
    if (!graph.has_process(pid)) throw ScenarioError("override for unknown process " + pid);
    if (c < 0) throw ScenarioError("negative constraint override for " + pid);
  }
  if (transport)
    for (const auto& [v, bin] : transport->bins)
      if (!graph.producer(v)) throw ScenarioError("bin output " + v + " is not produced by any process");
}

std::optional<std::size_t> SimulationResult::detection_of(const std::string& monitor) const {
  for (const Detection& d : detections)
    if (d.monitor == monitor) return d.round;
  return std::nullopt;
}

Trace merge_traces(const std::map<std::string, Trace>& per_process, std::size_t rounds) {
  Trace t;
  t.events.assign(rounds, Event{{}, 1, {}});
  for (const auto& [pid, tr] : per_process)
    for (std::size_t k = 0; k < rounds && k < tr.size(); ++k)
      t.events[k].props.insert(tr.events[k].props.begin(), tr.events[k].props.end());
  return t;
}

ScenarioMonitors scenario_monitors(const Scenario& s) {
  ScenarioMonitors out;
  if (!s.monitor_table.empty()) {
    std::vector<std::string> ring;
    for (const Process& p : s.graph.processes()) ring.push_back(p.pid);
    std::sort(ring.begin(), ring.end(), natural_less);
    for (const MonitorEntry& e : s.monitor_table) {
      LocalMonitor m;
      m.pid = e.pid;
      m.assigned = Formula::eventually(Formula::negation(e.qdep));
      m.residual = m.assigned;
      m.comm_order = ring;
      const auto alpha = s.graph.process(e.pid).alphabet();
      for (const std::string& a : atoms(m.assigned))
        if (!alpha.count(a)) m.remote.insert(a);
      out.index.extend(m.assigned);
      out.monitors.push_back(std::move(m));
      out.names.push_back(e.name);
      out.watched.push_back(e.qdep);
    }
    return out;
  }

  MonitorSetup setup = prepare_monitors(s.property, s.graph);
  out.index = setup.index;
  std::map<std::string, int> seen;
  for (LocalMonitor& m : setup.monitors) {
    if (auto it = s.constraint_overrides.find(m.pid); it != s.constraint_overrides.end()) {
      m.assigned = with_bound(m.assigned, it->second);
      m.residual = m.assigned;
      out.index.extend(m.assigned);
    }
    const int n = seen[m.pid]++;
    out.names.push_back(n == 0 ? m.pid : m.pid + "#" + std::to_string(n));
    out.watched.push_back(first_qdep(m.assigned));
    out.monitors.push_back(std::move(m));
  }
  return out;
}

namespace {

struct Rule {
  std::string pid;
  std::string out;
  std::vector<std::string> trigger;
  Cost latency = 0;
  Cost jitter = 0;
  bool done = false;
  std::optional<std::size_t> due;
  /// Latest arrival among the trigger inputs once all are present.
  std::optional<std::size_t> ready;
};

struct ActiveFault {
  FaultSpec spec;
  bool hit = false;
  std::optional<std::size_t> manifested;
  bool recovered = false;
};

class Engine {
 public:
  Engine(const Scenario& s, std::size_t rounds) : s_(s), rounds_(rounds), rng_(s.seed) {
    for (const Process& p : s.graph.processes()) {
      auto bit = s.behaviors.find(p.pid);
      const Behavior b = bit == s.behaviors.end() ? Behavior{p.cost, 0, {}} : bit->second;
      for (const std::string& out : p.outputs) {
        Rule r;
        r.pid = p.pid;
        r.out = out;
        r.trigger = p.inputs;
        r.latency = b.latency;
        r.jitter = b.jitter;
        if (auto oit = b.outputs.find(out); oit != b.outputs.end()) {
          if (!oit->second.trigger.empty()) r.trigger = oit->second.trigger;
          if (oit->second.latency) r.latency = *oit->second.latency;
        }
        rules_.push_back(std::move(r));
      }
      latched_[p.pid];
    }
    for (const FaultSpec& f : s.faults) {
      ActiveFault a;
      a.spec = s.resolve(f);
      faults_.push_back(a);
    }
    for (const Stimulus& st : s.stimuli)
      if (!anchor_ || st.round < *anchor_) anchor_ = st.round;
    if (s.transport && anchor_) deadline_ = *anchor_ + s.transport->eject_after;
    auto qs = extract_qdep(s.property);
    if (!qs.empty()) trigger_ = qs.front().lhs;
  }

  SimulationResult run() {
    ScenarioMonitors sm = scenario_monitors(s_);
    SimulationResult res;
    for (const Process& p : s_.graph.processes()) res.per_process_traces[p.pid];
    for (const std::string& n : sm.names) res.report.verdict_history[n];
    const MonitorConfig config{};
    std::optional<Formula> baseline;
    if (s_.baseline) baseline = s_.baseline->formula;

    for (std::size_t r = 0; r < rounds_; ++r) {
      produced_.clear();
      for (const Stimulus& st : s_.stimuli)
        if (st.round == r)
          for (const std::string& v : st.vars) deliver(v, r);
      settle(r);

      std::map<std::string, Event> events;
      for (const Process& p : s_.graph.processes()) {
        Event e{{}, 1, {}};
        for (const auto& [v, at] : latched_[p.pid]) e.props.insert(v);
        for (const auto& [pid, v] : produced_)
          if (pid == p.pid) e.props.insert(v);
        if (anchor_ && r >= *anchor_)
          for (const std::string& v : e.props) e.age[v] = static_cast<Cost>(r - *anchor_);
        res.per_process_traces[p.pid].events.push_back(e);
        events.emplace(p.pid, std::move(e));
      }
      for (auto& [pid, vs] : release_)
        for (const std::string& v : vs) latched_[pid].erase(v);
      release_.clear();

      Event merged{{}, 1, {}};
      for (const auto& [pid, e] : events) merged.props.insert(e.props.begin(), e.props.end());
      res.global_trace.events.push_back(merged);
      if (trigger_ && progress(*trigger_, merged).is(Kind::True)) res.last_trigger_round = r;

      std::vector<Verdict> before;
      for (const LocalMonitor& m : sm.monitors) before.push_back(m.verdict);
      RoundResult rr = sm.monitors.empty() ? RoundResult{} : monitor_round(sm.monitors, events, r, s_.graph, sm.index, config);
      res.report.rounds = r + 1;
      res.report.messages_per_round.push_back(rr.messages.size());
      std::vector<std::size_t> fresh;
      for (std::size_t i = 0; i < sm.monitors.size(); ++i) {
        res.report.verdict_history[sm.names[i]].push_back(sm.monitors[i].verdict);
        if (before[i] == Verdict::Unknown && sm.monitors[i].verdict == Verdict::True) {
          fresh.push_back(i);
          res.detections.push_back({sm.names[i], sm.monitors[i].pid, sm.watched[i], r});
        }
      }
      if (rr.global && !res.report.detection_round) {
        res.report.global_verdict = *rr.global;
        res.report.detection_round = r;
        for (std::size_t i = 0; i < sm.monitors.size(); ++i)
          if (before[i] == Verdict::Unknown && sm.monitors[i].verdict != Verdict::Unknown &&
              (*rr.global != Verdict::False || sm.monitors[i].verdict == Verdict::True)) {
            res.report.detecting_pid = sm.monitors[i].pid;
            break;
          }
      }
      if (baseline && !res.baseline_detection) {
        baseline = progress(*baseline, merged, 0, config.progress);
        if (baseline->is(Kind::False)) res.baseline_detection = r;
      }
      recover(r, fresh, sm, res);
      if (s_.transport && !bin_ && deadline_ && r > *deadline_ && !bin_pending()) bin_ = s_.transport->fallback_bin;
    }
    res.bin = bin_;
    for (const ActiveFault& f : faults_) res.manifested.push_back(f.manifested);
    return res;
  }

 private:
  void deliver(const std::string& v, std::size_t r) {
    for (const std::string& c : s_.graph.consumers(v)) latched_[c].emplace(v, r);
  }

  void produce(const std::string& pid, const std::string& v, std::size_t r) {
    produced_.emplace_back(pid, v);
    if (s_.transport && !bin_)
      if (auto it = s_.transport->bins.find(v); it != s_.transport->bins.end()) bin_ = it->second;
    deliver(v, r);
  }

  bool is_bin(const std::string& v) const { return s_.transport && s_.transport->bins.count(v); }

  // A bin output that can still beat the ejection deadline.
  bool bin_pending() const {
    for (const Rule& rule : rules_)
      if (is_bin(rule.out) && !rule.done && rule.ready && *rule.ready <= *deadline_) return true;
    return false;
  }

  void finish(Rule& rule) {
    rule.done = true;
    for (const std::string& v : rule.trigger) {
      const bool still_needed = std::any_of(rules_.begin(), rules_.end(), [&](const Rule& o) {
        return o.pid == rule.pid && !o.done && std::find(o.trigger.begin(), o.trigger.end(), v) != o.trigger.end();
      });
      if (!still_needed) release_[rule.pid].insert(v);
    }
  }

  // Fires everything due this round, including chains of zero-latency steps.
  void settle(std::size_t r) {
    for (auto it = reemit_.begin(); it != reemit_.end();) {
      if (it->first == r) {
        produce(it->second.first, it->second.second, r);
        it = reemit_.erase(it);
      } else {
        ++it;
      }
    }
    bool changed = true;
    while (changed) {
      changed = false;
      for (Rule& rule : rules_) {
        if (rule.done) continue;
        if (!rule.ready) {
          const auto& held = latched_[rule.pid];
          std::size_t last = 0;
          bool all = true;
          for (const std::string& v : rule.trigger) {
            auto it = held.find(v);
            if (it == held.end()) { all = false; break; }
            last = std::max(last, it->second);
          }
          if (!all) continue;
          rule.ready = last;
          // One draw per process, so outputs sharing a latency fire together.
          auto [jit, fresh] = jitter_.try_emplace(rule.pid, 0);
          if (fresh && rule.jitter > 0) jit->second = std::uniform_int_distribution<Cost>(0, rule.jitter)(rng_);
          const Cost extra = jit->second;
          rule.due = std::max<std::size_t>(r, last + static_cast<std::size_t>(rule.latency + extra));
          changed = true;
        }
        if (rule.due != r) continue;
        changed = true;
        if (ActiveFault* f = fault_for(rule.out, r)) {
          f->hit = true;
          f->manifested = r;
          finish(rule);
          if (delays(f->spec.kind)) {
            // The process has fired; only the delivery is late.
            reemit_.emplace(r + static_cast<std::size_t>(f->spec.extra), std::make_pair(rule.pid, rule.out));
            continue;
          }
          if (is_bin(rule.out) && !bin_) bin_ = 0;
          continue;
        }
        finish(rule);
        if (is_bin(rule.out) && (bin_ || (deadline_ && *rule.ready > *deadline_))) continue;
        produce(rule.pid, rule.out, r);
      }
    }
  }

  ActiveFault* fault_for(const std::string& v, std::size_t r) {
    for (ActiveFault& f : faults_)
      if (!f.hit && f.spec.target == v && r >= f.spec.at_round) return &f;
    return nullptr;
  }

  void recover(std::size_t r, const std::vector<std::size_t>& fresh, const ScenarioMonitors& sm, SimulationResult& res) {
    if (fresh.empty()) return;
    for (ActiveFault& f : faults_) {
      if (!f.manifested || f.recovered || r < *f.manifested) continue;
      auto ait = s_.recoveries.find(f.spec.kind);
      if (ait == s_.recoveries.end()) continue;
      // Prefer the monitors whose watched output is the faulty one.
      std::vector<std::size_t> designated;
      for (std::size_t i = 0; i < sm.watched.size(); ++i)
        if (sm.watched[i].is(Kind::QDep) && atoms(sm.watched[i].rhs()).count(f.spec.target)) designated.push_back(i);
      std::optional<std::size_t> trigger;
      for (std::size_t i : fresh)
        if (designated.empty() || std::count(designated.begin(), designated.end(), i)) {
          trigger = i;
          break;
        }
      if (!trigger) continue;
      f.recovered = true;
      const RecoveryAction& a = ait->second;
      res.recovery_log.push_back({r, f.spec, a, sm.names[*trigger], sm.watched[*trigger]});
      switch (a.kind) {
        case RecoveryKind::EjectToBin3:
          bin_ = 3;
          break;
        case RecoveryKind::ReferenceSecondSensor:
          if (auto p = s_.graph.producer(f.spec.target)) reemit_.emplace(r + 1, std::make_pair(*p, f.spec.target));
          break;
        case RecoveryKind::ReduceBeltSpeed:
          if (deadline_ && *deadline_ > r) deadline_ = r + static_cast<std::size_t>(a.factor) * (*deadline_ - r);
          break;
      }
    }
  }

  const Scenario& s_;
  std::size_t rounds_;
  std::mt19937_64 rng_;
  std::vector<Rule> rules_;
  std::vector<ActiveFault> faults_;
  std::map<std::string, std::map<std::string, std::size_t>> latched_;
  std::map<std::string, std::set<std::string>> release_;
  std::vector<std::pair<std::string, std::string>> produced_;
  std::multimap<std::size_t, std::pair<std::string, std::string>> reemit_;
  std::map<std::string, Cost> jitter_;
  std::optional<std::size_t> anchor_;
  std::optional<std::size_t> deadline_;
  std::optional<int> bin_;
  std::optional<Formula> trigger_;
};

}  // namespace

SimulationResult run_simulation(const Scenario& s) { return run_simulation(s, s.rounds); }

SimulationResult run_simulation(const Scenario& s, std::size_t rounds) {
  s.validate();
  return Engine(s, rounds).run();
}

namespace {

// Same wiring as data/graphs/sorting_line.json.
constexpr const char* kSortingLineGraph = R"({
  "processes": [
    {"pid": "TD", "inputs": ["LS1", "SC"], "outputs": ["T_CS", "SC_CP"], "cost": 1},
    {"pid": "WCP", "inputs": ["T_CS", "W_TOKEN"], "outputs": ["CV_W"], "cost": 1},
    {"pid": "BCP", "inputs": ["T_CS", "B_TOKEN"], "outputs": ["CV_B"], "cost": 1},
    {"pid": "WBR", "inputs": ["CV_W", "SC_CP"], "outputs": ["E_W"], "cost": 0},
    {"pid": "BBR", "inputs": ["CV_B", "SC_CP"], "outputs": ["E_B"], "cost": 0},
    {"pid": "EC", "inputs": ["E_W", "E_B", "LS2"], "outputs": ["A_W", "A_B"], "cost": 2}
  ],
  "environment": ["LS1", "SC", "W_TOKEN", "B_TOKEN", "LS2"]
})";

}  // namespace

Scenario build_sorting_line_scenario(TokenColor color) {
  const bool white = color == TokenColor::White;
  const std::string k = white ? "W" : "B";
  Scenario s;
  s.name = white ? "sorting_line" : "sorting_line_blue";
  s.graph = load_graph(kSortingLineGraph);
  // The arrival bound in the property is one round looser than the
  // end-to-end monitor in the table.
  s.property = parse_formula(white ? "G ((LS1 & SC) o<=5 A_W)" : "G ((LS1 & SC) o<=6 A_B)");

  s.behaviors["TD"] = {1, 0, {}};
  s.behaviors["WCP"] = {1, 0, {{"CV_W", {{"T_CS", "W_TOKEN"}, std::nullopt}}}};
  s.behaviors["BCP"] = {1, 0, {{"CV_B", {{"T_CS", "B_TOKEN"}, std::nullopt}}}};
  s.behaviors["WBR"] = {0, 0, {}};
  s.behaviors["BBR"] = {0, 0, {}};
  s.behaviors["EC"] = {2, 0, {{"A_W", {{"E_W", "LS2"}, 2}}, {"A_B", {{"E_B", "LS2"}, 3}}}};

  const std::size_t at = 4;
  s.stimuli = {{at, {"LS1", "SC", white ? "W_TOKEN" : "B_TOKEN"}}, {at + 2, {"LS2"}}};
  s.rounds = 16;
  s.transport = Transport{3, {{"A_W", 1}, {"A_B", 2}}, 3};

  s.recoveries = {
      {FaultKind::TriggerFailure, {RecoveryKind::EjectToBin3, 2}},
      {FaultKind::LostStepCount, {RecoveryKind::ReferenceSecondSensor, 2}},
      {FaultKind::OutputDelay, {RecoveryKind::ReduceBeltSpeed, 2}},
      {FaultKind::ArrivalFailure, {RecoveryKind::EjectToBin3, 2}},
  };
  s.fault_defaults = {
      {FaultKind::TriggerFailure, "T_CS"},
      {FaultKind::LostStepCount, "SC_CP"},
      {FaultKind::OutputDelay, "CV_" + k},
      {FaultKind::ArrivalFailure, "A_" + k},
  };

  // Every watched QDep is anchored at the token's arrival under LS1.
  auto watch = [](const std::string& v, Cost c) {
    return Formula::qdep(Formula::conj(Formula::atom("LS1"), Formula::atom("SC")), Formula::atom(v), c);
  };
  const std::string br = white ? "WBR" : "BBR";
  s.monitor_table = {
      {"phi_*", "TD", watch("T_CS", 1)},
      {k + "1", "TD", watch("SC_CP", 2)},
      {k + "2", br, watch("CV_" + k, 2)},
      {k + "3", br, watch("E_" + k, 2)},
      {k + "4", "EC", watch("A_" + k, white ? 4 : 5)},
  };
  s.baseline = Baseline{"EC", Formula::globally(watch("A_" + k, white ? 4 : 5))};
  return s;
}

Scenario random_scenario(std::uint64_t seed, const RandomLimits& limits) {
  if (limits.max_processes < 2) throw ScenarioError("random scenarios need at least two processes");
  if (limits.max_fanout < 1) throw ScenarioError("random scenarios need a fanout of at least one");
  if (limits.max_cost < 0) throw ScenarioError("negative cost limit");
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  auto chance = [&](double p) { return std::bernoulli_distribution(p)(rng); };

  for (int attempt = 0;; ++attempt) {
    const std::size_t n = pick(2, limits.max_processes);
    std::vector<Process> procs(n);
    std::vector<std::string> env;
    std::map<std::string, std::size_t> fanout;
    std::vector<std::string> open;  // outputs with free fanout, in creation order
    std::map<std::string, std::size_t> owner;

    for (std::size_t i = 0; i < n; ++i) {
      Process& p = procs[i];
      p.pid = "p" + std::to_string(i);
      p.cost = static_cast<Cost>(pick(0, static_cast<std::size_t>(limits.max_cost)));
      const bool source = i == 0 || (i + 1 < n && chance(0.25)) || open.empty();
      if (source) {
        const std::size_t k = pick(1, 2);
        for (std::size_t j = 0; j < k; ++j) {
          env.push_back("I" + std::to_string(env.size()));
          p.inputs.push_back(env.back());
        }
      } else {
        const std::size_t k = pick(1, std::min<std::size_t>(2, open.size()));
        std::vector<std::string> pool = open;
        std::shuffle(pool.begin(), pool.end(), rng);
        // Unconsumed outputs first, so every process keeps a consumer.
        std::stable_partition(pool.begin(), pool.end(), [&](const std::string& v) { return fanout[v] == 0; });
        for (std::size_t j = 0; j < k; ++j) p.inputs.push_back(pool[j]);
      }
      for (const std::string& v : p.inputs)
        if (!source && ++fanout[v] >= limits.max_fanout) open.erase(std::find(open.begin(), open.end(), v));
      const std::size_t outs = i + 1 == n ? 1 : pick(1, 2);
      for (std::size_t j = 0; j < outs; ++j) {
        p.outputs.push_back("O" + std::to_string(i) + (outs > 1 ? std::string(1, static_cast<char>('a' + j)) : ""));
        owner[p.outputs.back()] = i;
        if (i + 1 < n) open.push_back(p.outputs.back());
      }
    }
    // Any process nobody reads from feeds the sink directly.
    Process& sink = procs.back();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const bool read = std::any_of(procs[i].outputs.begin(), procs[i].outputs.end(),
                                    [&](const std::string& v) { return fanout[v] > 0; });
      if (read) continue;
      const std::string& v = procs[i].outputs.front();
      if (std::find(sink.inputs.begin(), sink.inputs.end(), v) == sink.inputs.end()) sink.inputs.push_back(v);
      ++fanout[v];
    }
    DependencyGraph g(procs, std::set<std::string>(env.begin(), env.end()));
    try {
      g.validate();
    } catch (const GraphError&) {
      if (attempt > 100) throw;
      continue;
    }

    Scenario s;
    s.name = "random-" + std::to_string(seed);
    s.graph = g;
    s.seed = seed;
    s.rounds = limits.max_rounds;
    for (const Process& p : procs) {
      const Cost extra = chance(0.2) ? 1 : 0;
      const Cost jitter = chance(0.3) ? 1 : 0;
      s.behaviors[p.pid] = {p.cost + extra, jitter, {}};
    }
    const std::string target = sink.outputs.front();
    Cost longest = 0;
    for (const DependencyPath& path : g.dependency_paths(target)) longest = std::max(longest, path_cost(path));
    const std::size_t at = pick(0, 2);
    s.stimuli = {{at, env}};

    if (chance(0.5)) {
      FaultSpec f;
      f.kind = chance(0.5) ? FaultKind::Drop : FaultKind::Delay;
      const Process& p = procs[pick(0, n - 1)];
      f.target = p.outputs[pick(0, p.outputs.size() - 1)];
      f.extra = delays(f.kind) ? static_cast<Cost>(pick(1, 4)) : 0;
      s.faults.push_back(f);
    }

    // The trigger holds until the first process reading the environment
    // fires, at the latest when p0 does. The verdict must be final q rounds
    // after that.
    const Behavior& b0 = s.behaviors["p0"];
    Cost first_fire = b0.latency + b0.jitter;
    for (const FaultSpec& f : s.faults)
      if (owner[f.target] == 0) first_fire += f.extra;
    const Cost q = longest + static_cast<Cost>(pick(0, 4));
    const std::size_t settled = at + static_cast<std::size_t>(first_fire + q) + 2;
    if (settled > s.rounds) {
      if (attempt > 1000) throw ScenarioError("random limits leave no room for a settled trace");
      continue;
    }
    std::vector<Formula> ins;
    for (const std::string& v : env) ins.push_back(Formula::atom(v));
    s.property = Formula::globally(Formula::qdep(make_chain(ins, Kind::And), Formula::atom(target), q));
    return s;
  }
}

namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

json fault_json(const FaultSpec& f) {
  json j{{"kind", std::string(to_string(f.kind))}, {"round", f.at_round}};
  if (!f.target.empty()) j["target"] = f.target;
  if (f.extra) j["extra"] = f.extra;
  return j;
}

FaultSpec fault_from(const json& j) {
  FaultSpec f;
  f.kind = fault_kind_from_string(j.at("kind").get<std::string>());
  f.target = field<std::string>(j, "target", "");
  f.at_round = field<std::size_t>(j, "round", 0);
  f.extra = field<Cost>(j, "extra", 0);
  return f;
}

}  // namespace

Scenario scenario_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ScenarioError("scenario must be a JSON object");
  Scenario s;
  try {
    s.name = field<std::string>(j, "name", "scenario");
    if (!j.contains("graph")) throw ScenarioError("scenario has no graph");
    const json& gj = j.at("graph");
    if (gj.is_string()) {
      std::filesystem::path p(gj.get<std::string>());
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      s.graph = load_graph_file(p.string());
    } else {
      s.graph = graph_from_json(gj);
    }
    if (!j.contains("property")) throw ScenarioError("scenario has no property");
    s.property = parse_formula(j.at("property").get<std::string>());
    const json behaviors = field<json>(j, "behaviors", json::object());
    for (const auto& [pid, bj] : behaviors.items()) {
      Behavior b;
      b.latency = field<Cost>(bj, "latency", s.graph.has_process(pid) ? s.graph.process(pid).cost : 0);
      b.jitter = field<Cost>(bj, "jitter", 0);
      const json outputs = field<json>(bj, "outputs", json::object());
      for (const auto& [out, rj] : outputs.items()) {
        OutputRule r;
        r.trigger = field<std::vector<std::string>>(rj, "trigger", {});
        if (rj.contains("latency")) r.latency = rj.at("latency").get<Cost>();
        b.outputs[out] = r;
      }
      s.behaviors[pid] = b;
    }
    for (const json& sj : field<json>(j, "stimuli", json::array()))
      s.stimuli.push_back({sj.at("round").get<std::size_t>(), sj.at("vars").get<std::vector<std::string>>()});
    for (const json& fj : field<json>(j, "faults", json::array())) s.faults.push_back(fault_from(fj));
    const json recoveries = field<json>(j, "recoveries", json::object());
    for (const auto& [kind, rj] : recoveries.items())
      s.recoveries[fault_kind_from_string(kind)] = {recovery_kind_from_string(rj.at("action").get<std::string>()),
                                                    field<Cost>(rj, "factor", 2)};
    const json defaults = field<json>(j, "fault_defaults", json::object());
    for (const auto& [kind, v] : defaults.items())
      s.fault_defaults[fault_kind_from_string(kind)] = v.get<std::string>();
    s.seed = field<std::uint64_t>(j, "seed", 0);
    s.rounds = field<std::size_t>(j, "rounds", 20);
    if (j.contains("transport")) {
      const json& tj = j.at("transport");
      s.transport = Transport{field<std::size_t>(tj, "eject_after", 3),
                              field<std::map<std::string, int>>(tj, "bins", {}), field<int>(tj, "fallback_bin", 3)};
    }
    for (const json& mj : field<json>(j, "monitor_table", json::array())) {
      MonitorEntry m{mj.at("name").get<std::string>(), mj.at("pid").get<std::string>(), parse_formula(mj.at("qdep").get<std::string>())};
      if (mj.contains("c")) m.qdep = with_bound(m.qdep, mj.at("c").get<Cost>());
      s.monitor_table.push_back(m);
    }
    if (j.contains("baseline"))
      s.baseline = Baseline{j.at("baseline").at("pid").get<std::string>(),
                            parse_formula(j.at("baseline").at("formula").get<std::string>())};
    s.constraint_overrides = field<std::map<std::string, Cost>>(j, "constraint_overrides", {});
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j{{"name", s.name}, {"graph", graph_to_json(s.graph)}, {"property", render_formula(s.property)},
         {"seed", s.seed}, {"rounds", s.rounds}};
  json behaviors = json::object();
  for (const auto& [pid, b] : s.behaviors) {
    json bj{{"latency", b.latency}, {"jitter", b.jitter}};
    if (!b.outputs.empty()) {
      json outs = json::object();
      for (const auto& [out, r] : b.outputs) {
        json rj{{"trigger", r.trigger}};
        if (r.latency) rj["latency"] = *r.latency;
        outs[out] = rj;
      }
      bj["outputs"] = outs;
    }
    behaviors[pid] = bj;
  }
  j["behaviors"] = behaviors;
  j["stimuli"] = json::array();
  for (const Stimulus& st : s.stimuli) j["stimuli"].push_back({{"round", st.round}, {"vars", st.vars}});
  j["faults"] = json::array();
  for (const FaultSpec& f : s.faults) j["faults"].push_back(fault_json(f));
  json rec = json::object();
  for (const auto& [kind, a] : s.recoveries)
    rec[std::string(to_string(kind))] = {{"action", std::string(to_string(a.kind))}, {"factor", a.factor}};
  j["recoveries"] = rec;
  json defaults = json::object();
  for (const auto& [kind, v] : s.fault_defaults) defaults[std::string(to_string(kind))] = v;
  j["fault_defaults"] = defaults;
  if (s.transport)
    j["transport"] = {{"eject_after", s.transport->eject_after}, {"bins", s.transport->bins},
                      {"fallback_bin", s.transport->fallback_bin}};
  if (!s.monitor_table.empty()) {
    j["monitor_table"] = json::array();
    for (const MonitorEntry& m : s.monitor_table)
      j["monitor_table"].push_back(
          {{"name", m.name}, {"pid", m.pid}, {"qdep", render_formula(m.qdep)}, {"c", m.qdep.bound()}});
  }
  if (s.baseline) j["baseline"] = {{"pid", s.baseline->pid}, {"formula", render_formula(s.baseline->formula)}};
  if (!s.constraint_overrides.empty()) j["constraint_overrides"] = s.constraint_overrides;
  return j;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j, std::filesystem::path(path).parent_path().string());
}

json trace_log_json(const SimulationResult& r) {
  json rounds = json::array();
  for (std::size_t k = 0; k < r.global_trace.size(); ++k) {
    json procs = json::object();
    for (const auto& [pid, t] : r.per_process_traces) {
      if (k >= t.size()) continue;
      procs[pid] = {{"props", t.events[k].props}, {"cost", t.events[k].cost}};
    }
    rounds.push_back({{"round", k}, {"processes", procs}});
  }
  return rounds;
}

json recovery_log_json(const SimulationResult& r) {
  json out = json::array();
  for (const RecoveryRecord& rec : r.recovery_log)
    out.push_back({{"round", rec.round},
                   {"fault", fault_json(rec.fault)},
                   {"action", std::string(to_string(rec.action.kind))},
                   {"monitor", rec.monitor},
                   {"formula", render_formula(rec.formula)}});
  return out;
}

}  // namespace ccmon
