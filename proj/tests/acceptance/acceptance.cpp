// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "ccmon/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace ccmon;

namespace {

const std::string kData = CCMON_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failed checks into a short diagnostic.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_ < 5) notes_ << (failures_ ? "; " : "") << what;
    ++failures_;
  }
  Outcome outcome(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    std::ostringstream o;
    o << failures_ << " check(s) failed: " << notes_.str();
    return {false, o.str()};
  }

 private:
  std::size_t failures_ = 0;
  std::ostringstream notes_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string secs(double s) {
  std::ostringstream o;
  o.precision(3);
  o << s << "s";
  return o.str();
}

const std::string kForkJoinProperty = "G ((I0 & I1) o<=20 Of)";

Outcome constraint_synthesis() {
  Checker c;
  const auto t0 = std::chrono::steady_clock::now();
  UnwoundFormula u = unwind(parse_formula(kForkJoinProperty), load_graph_file(kData + "/graphs/fork_join.json"));
  const double took = seconds_since(t0);
  std::map<std::string, Cost> got;
  for (const UnwoundConjunct& k : u.conjuncts) got[render_formula(k.qdep)] = k.constraint;
  const std::map<std::string, Cost> want{{"(I0 o<=11 O0)", 11}, {"(I1 o<=16 O1)", 16}, {"(O0 o<=12 O2)", 12},
                                         {"(O0 o<=13 O3)", 13}, {"(O2 o<=16 O4)", 16}, {"(O3 o<=16 O5)", 16},
                                         {"((O1 & O4 & O5) o<=20 Of)", 20}};
  c.expect(u.conjuncts.size() == want.size(), "expected 7 conjuncts");
  c.expect(got == want, "constraint map differs");
  c.expect(took < 1.0, "took " + secs(took));
  return c.outcome("7 constraints match in " + secs(took));
}

Outcome grouping_table() {
  Checker c;
  MonitorSetup s = prepare_monitors(parse_formula(kForkJoinProperty), load_graph_file(kData + "/graphs/fork_join.json"));
  c.expect(s.groups.size() == 7, "expected 7 groups, got " + std::to_string(s.groups.size()));
  for (const MonitorGroup& g : s.groups) c.expect(g.members.size() == 1, "group is not a singleton");
  std::map<std::string, std::string> got;
  for (const auto& [pid, f] : s.assignment) got[pid] = render_formula(f);
  const std::map<std::string, std::string> want{
      {"p0", "F !(I0 o<=11 O0)"}, {"p1", "F !(I1 o<=16 O1)"}, {"p2", "F !(O0 o<=12 O2)"},
      {"p3", "F !(O0 o<=13 O3)"}, {"p4", "F !(O2 o<=16 O4)"}, {"p5", "F !(O3 o<=16 O5)"},
      {"p6", "F !((O1 & O4 & O5) o<=20 Of)"}};
  c.expect(got == want, "assigned formulas differ");
  return c.outcome("7 singleton groups with the expected sub-formulas");
}

std::vector<std::string> leaf_label(const Tableau& t, const Branch& b) {
  std::vector<std::string> out;
  for (const Formula& f : t.node(b.nodes.back()).formulas()) out.push_back(render_formula(f));
  return out;
}

Outcome tableau_shapes() {
  Checker c;
  {
    Tableau t = build_tableau(parse_formula("p & (q | r)"));
    auto bs = t.branches();
    c.expect(bs.size() == 2, "p & (q | r): expected 2 branches");
    for (const Branch& b : bs) c.expect(b.outcome == NodeStatus::Ticked, "p & (q | r): branch not ticked");
  }
  {
    Tableau t = build_tableau(parse_formula("G p"));
    auto bs = t.branches();
    c.expect(bs.size() == 1, "G p: expected 1 branch");
    if (bs.size() == 1) {
      c.expect(bs[0].outcome == NodeStatus::Ticked, "G p: not ticked");
      c.expect(t.node(bs[0].nodes.back()).rule == TableauRule::Loop, "G p: tick is not by LOOP");
    }
  }
  {
    Tableau t = build_tableau(parse_formula("G ((a & b) o<=3 c)"));
    auto bs = t.branches();
    c.expect(bs.size() == 1, "cost distribution: expected 1 branch");
    if (bs.size() == 1) {
      bool dist = false;
      for (std::size_t id : bs[0].nodes) dist = dist || t.node(id).rule == TableauRule::Dist;
      c.expect(dist, "cost distribution: no DIST step");
      c.expect(bs[0].outcome == NodeStatus::Ticked, "cost distribution: not ticked");
      auto leaf = leaf_label(t, bs[0]);
      auto has = [&](const std::string& s) { return std::find(leaf.begin(), leaf.end(), s) != leaf.end(); };
      c.expect(has("(a o<=3 c)") && has("(b o<=3 c)"), "cost distribution: leaf lacks the split obligations");
    }
  }
  return c.outcome("branch counts 2/1/1, LOOP tick, DIST split present");
}

Scenario fork_join_scenario() {
  Scenario s;
  s.name = "fork_join";
  s.graph = load_graph_file(kData + "/graphs/fork_join.json");
  s.property = parse_formula(kForkJoinProperty);
  for (const Process& p : s.graph.processes()) s.behaviors[p.pid] = {p.cost, 0, {}};
  s.stimuli = {{3, {"I0", "I1"}}};
  s.rounds = 30;
  return s;
}

Outcome early_detection() {
  Checker c;
  Scenario s = fork_join_scenario();
  s.faults.push_back({FaultKind::Drop, "O0", 0, 0});
  SimulationResult r = run_simulation(s);
  c.expect(r.report.global_verdict == Verdict::False, "no violation reported");
  c.expect(r.report.detecting_pid == "p0", "detected by " + r.report.detecting_pid.value_or("nobody"));
  c.expect(r.report.detection_round == std::optional<std::size_t>{14},
           "detected at " + (r.report.detection_round ? std::to_string(*r.report.detection_round) : "never"));
  return c.outcome("stall at round 3 detected by p0 at round 14");
}

constexpr std::uint64_t kCorpus = 250;

Outcome unwinding_equivalence() {
  Checker c;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t falsified = 0;
  for (std::uint64_t seed = 0; seed < kCorpus; ++seed) {
    Scenario s = random_scenario(seed);
    c.expect(s.graph.processes().size() <= 6 && s.rounds <= 20, "seed " + std::to_string(seed) + " exceeds limits");
    SimulationResult r = run_simulation(s);
    UnwoundFormula u = unwind(s.property, s.graph);
    const Verdict a = evaluate_trace(s.property, r.global_trace);
    const Verdict b = evaluate_trace(u.monitored, r.global_trace);
    c.expect(a == b, "seed " + std::to_string(seed) + " disagrees");
    if (a == Verdict::False) ++falsified;
  }
  const double took = seconds_since(t0);
  c.expect(took < 30.0, "took " + secs(took));
  return c.outcome(std::to_string(kCorpus) + " scenarios agree (" + std::to_string(falsified) + " falsified) in " +
                   secs(took));
}

Outcome decentralized_soundness() {
  Checker c;
  std::size_t decided = 0;
  for (std::uint64_t seed = 0; seed < kCorpus; ++seed) {
    Scenario s = random_scenario(seed);
    SimulationResult r = run_simulation(s);
    MonitorReport central = run_centralized(s.property, r.global_trace);
    const std::string tag = "seed " + std::to_string(seed);
    if (r.report.global_verdict == Verdict::Unknown) continue;
    ++decided;
    c.expect(r.report.global_verdict == central.global_verdict, tag + ": verdicts differ");
    if (central.detection_round) {
      c.expect(r.report.detection_round.has_value(), tag + ": no decentralized round");
      if (r.report.detection_round)
        c.expect(*r.report.detection_round <= *central.detection_round, tag + ": decentralized is later");
    }
  }
  return c.outcome(std::to_string(decided) + " decided scenarios, all sound and no later");
}

struct FaultCase {
  TokenColor color;
  FaultKind kind;
  std::string target;
  std::string monitor;
  RecoveryKind action;
};

Outcome case_study() {
  Checker c;
  const std::vector<std::pair<std::string, Cost>> white{{"phi_*", 1}, {"W1", 2}, {"W2", 2}, {"W3", 2}, {"W4", 4}};
  const std::vector<std::pair<std::string, Cost>> blue{{"phi_*", 1}, {"B1", 2}, {"B2", 2}, {"B3", 2}, {"B4", 5}};
  for (TokenColor color : {TokenColor::White, TokenColor::Blue}) {
    Scenario s = build_sorting_line_scenario(color);
    const auto& want = color == TokenColor::White ? white : blue;
    c.expect(s.monitor_table.size() == want.size(), "monitor table size");
    for (std::size_t i = 0; i < std::min(want.size(), s.monitor_table.size()); ++i)
      c.expect(s.monitor_table[i].name == want[i].first && s.monitor_table[i].qdep.bound() == want[i].second,
               "table entry " + want[i].first);
  }

  const std::vector<FaultCase> cases{
      {TokenColor::White, FaultKind::TriggerFailure, "", "phi_*", RecoveryKind::EjectToBin3},
      {TokenColor::White, FaultKind::LostStepCount, "", "W1", RecoveryKind::ReferenceSecondSensor},
      {TokenColor::White, FaultKind::OutputDelay, "CV_W", "W2", RecoveryKind::ReduceBeltSpeed},
      {TokenColor::White, FaultKind::OutputDelay, "E_W", "W3", RecoveryKind::ReduceBeltSpeed},
      {TokenColor::White, FaultKind::ArrivalFailure, "", "W4", RecoveryKind::EjectToBin3},
      {TokenColor::Blue, FaultKind::TriggerFailure, "", "phi_*", RecoveryKind::EjectToBin3},
      {TokenColor::Blue, FaultKind::LostStepCount, "", "B1", RecoveryKind::ReferenceSecondSensor},
      {TokenColor::Blue, FaultKind::OutputDelay, "CV_B", "B2", RecoveryKind::ReduceBeltSpeed},
      {TokenColor::Blue, FaultKind::OutputDelay, "E_B", "B3", RecoveryKind::ReduceBeltSpeed},
      {TokenColor::Blue, FaultKind::ArrivalFailure, "", "B4", RecoveryKind::EjectToBin3}};
  for (const FaultCase& fc : cases) {
    Scenario s = build_sorting_line_scenario(fc.color);
    s.faults.push_back({fc.kind, fc.target, 0, 0});
    SimulationResult r = run_simulation(s);
    const std::string tag = std::string(to_string(fc.kind)) + "/" + fc.monitor;
    const auto det = r.detection_of(fc.monitor);
    c.expect(det.has_value(), tag + ": designated monitor silent");
    c.expect(r.recovery_log.size() == 1, tag + ": expected one recovery");
    if (!det || r.recovery_log.size() != 1) continue;
    const RecoveryRecord& rec = r.recovery_log.front();
    c.expect(rec.monitor == fc.monitor && rec.action.kind == fc.action && rec.round == *det,
             tag + ": wrong recovery");
    c.expect(r.baseline_detection.has_value(), tag + ": baseline silent");
    if (!r.baseline_detection) continue;
    if (fc.kind == FaultKind::ArrivalFailure) c.expect(*det == *r.baseline_detection, tag + ": rounds do not coincide");
    else c.expect(*det < *r.baseline_detection, tag + ": not earlier than the baseline");
  }
  return c.outcome("table constants kept; 10 faults detected by their monitors with matching recoveries");
}

// Brute-force reading of the cost semantics over all (i, j) position pairs:
// an activation at i is met by the first j >= i holding b whose costs over
// i+1..j sum to at most q, and lost once that sum exceeds q.
enum class Pair { Met, Lost, Open };

Pair activation(const Trace& t, std::size_t i, Cost q) {
  Cost spent = 0;
  for (std::size_t j = i; j < t.size(); ++j) {
    if (j > i) spent += t.events[j].cost;
    if (spent > q) return Pair::Lost;
    if (t.events[j].holds("b")) return Pair::Met;
  }
  return Pair::Open;
}

Verdict oracle_globally(const Trace& t, Cost q) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t.events[i].holds("a") && activation(t, i, q) == Pair::Lost) return Verdict::False;
  return Verdict::Unknown;
}

Verdict oracle_once(const Trace& t, Cost q) {
  if (t.empty()) return Verdict::Unknown;
  if (!t.events[0].holds("a")) return Verdict::True;
  switch (activation(t, 0, q)) {
    case Pair::Met: return Verdict::True;
    case Pair::Lost: return Verdict::False;
    case Pair::Open: return Verdict::Unknown;
  }
  return Verdict::Unknown;
}

Verdict verdict_of(const Formula& residual) {
  if (residual.is(Kind::True)) return Verdict::True;
  if (residual.is(Kind::False)) return Verdict::False;
  return Verdict::Unknown;
}

Outcome oracle_equivalence() {
  Checker c;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Event> sigma;
  for (const std::set<std::string>& props : std::vector<std::set<std::string>>{{}, {"a"}, {"b"}, {"a", "b"}})
    for (Cost cost : {0, 1, 2}) sigma.push_back({props, cost, {}});

  constexpr std::size_t kMaxLength = 6;
  std::size_t checked = 0;
  struct Case {
    Formula f;
    std::function<Verdict(const Trace&)> oracle;
  };
  std::vector<Case> cases;
  for (Cost q : {0, 1, 2, 3}) {
    Formula qd = Formula::qdep(Formula::atom("a"), Formula::atom("b"), q);
    cases.push_back({Formula::globally(qd), [q](const Trace& t) { return oracle_globally(t, q); }});
    cases.push_back({qd, [q](const Trace& t) { return oracle_once(t, q); }});
  }
  for (const Case& k : cases) {
    // Walk the tree of prefixes so each residual is progressed once.
    Trace t;
    std::function<void(const Formula&, Cost)> walk = [&](const Formula& residual, Cost d) {
      if (t.size() == kMaxLength) return;
      for (const Event& e : sigma) {
        t.events.push_back(e);
        Formula next = residual.is_constant() ? residual : progress(residual, e, d);
        ++checked;
        c.expect(verdict_of(next) == k.oracle(t), render_formula(k.f) + " disagrees on a length " +
                                                        std::to_string(t.size()) + " trace");
        walk(next, d + e.cost);
        t.events.pop_back();
      }
    };
    walk(normalize(k.f), 0);
  }
  const double took = seconds_since(t0);
  c.expect(took < 60.0, "took " + secs(took));
  return c.outcome(std::to_string(checked) + " trace checks across " + std::to_string(cases.size()) +
                   " formulas in " + secs(took));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"constraint synthesis", constraint_synthesis},
      {"grouping table", grouping_table},
      {"tableau shapes", tableau_shapes},
      {"early detection bound", early_detection},
      {"unwinding preserves verdicts", unwinding_equivalence},
      {"decentralized soundness", decentralized_soundness},
      {"sorting-line case study", case_study},
      {"oracle equivalence", oracle_equivalence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
