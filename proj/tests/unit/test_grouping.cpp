#include "ccmon/grouping.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <functional>
#include <map>

using namespace ccmon;

namespace {

const std::string kData = CCMON_DATA_DIR;

DependencyGraph chain() { return load_graph_file(kData + "/graphs/chain.json"); }
DependencyGraph fork_join() { return load_graph_file(kData + "/graphs/fork_join.json"); }

struct Pipeline {
  DependencyGraph g;
  UnwoundFormula u;
  Formula negated;
  Tableau t;
  std::vector<MonitorGroup> groups;
};

Pipeline run(DependencyGraph g, const std::string& property) {
  Pipeline p{std::move(g), {}, {}, {}, {}};
  p.u = unwind(parse_formula(property), p.g);
  p.negated = negate(p.u.formula);
  p.t = build_tableau(p.negated);
  p.groups = organize_groups(p.g.processes(), p.t);
  return p;
}

std::set<std::string> union_atoms(const std::vector<MonitorGroup>& gs) {
  std::set<std::string> out;
  for (const MonitorGroup& g : gs)
    for (const auto& a : atoms(g.formula)) out.insert(a);
  return out;
}

}  // namespace

TEST(Grouping, ForkJoinSingletons) {
  Pipeline p = run(fork_join(), "G ((I0 & I1) o<=20 Of)");
  ASSERT_EQ(p.groups.size(), 7u);
  std::vector<std::string> order;
  for (const MonitorGroup& g : p.groups) {
    ASSERT_EQ(g.members.size(), 1u);
    order.push_back(*g.members.begin());
  }
  EXPECT_EQ(order, (std::vector<std::string>{"p0", "p1", "p2", "p3", "p4", "p5", "p6"}));

  auto assigned = assign_conjuncts(p.groups, p.u, p.g);
  std::map<std::string, std::string> got;
  for (const auto& [pid, f] : assigned) got[pid] = render_formula(f);
  std::map<std::string, std::string> want{
      {"p0", "F !(I0 o<=11 O0)"},          {"p1", "F !(I1 o<=16 O1)"},
      {"p2", "F !(O0 o<=12 O2)"},          {"p3", "F !(O0 o<=13 O3)"},
      {"p4", "F !(O2 o<=16 O4)"},          {"p5", "F !(O3 o<=16 O5)"},
      {"p6", "F !((O1 & O4 & O5) o<=20 Of)"}};
  EXPECT_EQ(got, want);
}

TEST(Grouping, SingleBranchShortcut) {
  DependencyGraph g = chain();
  Formula f = parse_formula("G (I0 o<=12 Of)");
  Tableau t = build_tableau(f);
  ASSERT_EQ(t.branches().size(), 1u);
  auto groups = organize_groups(g.processes(), t);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].members, (std::set<std::string>{"p0", "p1", "p2"}));
  EXPECT_EQ(groups[0].formula, f);
  EXPECT_EQ(groups[0].comm_order, (std::vector<std::string>{"p0", "p1", "p2"}));
}

TEST(Grouping, OverlappingBranchesMerge) {
  std::vector<Process> procs{{"p0", {}, {"a"}, 1}, {"p1", {}, {"b"}, 1}};
  Tableau t = build_tableau(normalize(parse_formula("F !a | F !(a & b)")));
  auto groups = organize_groups(procs, t);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].members, (std::set<std::string>{"p0", "p1"}));
  std::set<Formula> parts;
  for (const Formula& d : flatten(groups[0].formula, Kind::Or)) parts.insert(d);
  EXPECT_EQ(parts, (std::set<Formula>{parse_formula("F !a"), normalize(parse_formula("F !(a & b)"))}));
}

TEST(Grouping, TransitiveOverlapsReachFixpoint) {
  // x touches p0,p1; z touches p2; y touches p1,p2 and joins the other two.
  std::vector<Process> procs{{"p0", {}, {"a"}, 1}, {"p1", {}, {"b"}, 1}, {"p2", {}, {"c"}, 1}};
  Tableau t = build_tableau(normalize(parse_formula("F (a & b) | F c | F (b & c)")));
  auto groups = organize_groups(procs, t);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].comm_order, (std::vector<std::string>{"p0", "p1", "p2"}));
}

TEST(Grouping, Errors) {
  std::vector<Process> procs{{"p0", {}, {"a"}, 1}};
  Tableau t = build_tableau(normalize(parse_formula("F !a | F !zz")));
  try {
    organize_groups(procs, t);
    FAIL();
  } catch (const GroupingError& e) {
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
  }
  EXPECT_THROW(organize_groups(procs, Tableau{}), GroupingError);
}

TEST(AssignConjuncts, EnvironmentOnlyConjunctHasNoOwner) {
  DependencyGraph g = chain();
  UnwoundFormula u = unwind(parse_formula("G (I0 o<=12 Of)"), g);
  MonitorGroup grp{{"p0"}, parse_formula("F !(I0 o<=3 I0)"), {"p0"}};
  EXPECT_THROW(assign_conjuncts({grp}, u, g), GroupingError);
}

TEST(AssignConjuncts, ProducerOwnsConjunct) {
  DependencyGraph g = fork_join();
  UnwoundFormula u = unwind(parse_formula("G ((I0 & I1) o<=20 Of)"), g);
  MonitorGroup grp{{"p0", "p6"}, parse_formula("F !(I0 o<=11 O0) | F !((O1 & O4 & O5) o<=20 Of)"), {"p0", "p6"}};
  auto a = assign_conjuncts({grp}, u, g);
  EXPECT_EQ(a.at("p0"), parse_formula("F !(I0 o<=11 O0)"));
  EXPECT_EQ(a.at("p6"), parse_formula("F !((O1 & O4 & O5) o<=20 Of)"));
}

TEST(Grouping, Invariants) {
  for (auto [graph, prop] : {std::pair{chain(), "G (I0 o<=12 Of)"}, std::pair{fork_join(), "G ((I0 & I1) o<=20 Of)"}}) {
    Pipeline p = run(graph, prop);
    for (std::size_t i = 0; i < p.groups.size(); ++i) {
      EXPECT_FALSE(p.groups[i].members.empty());
      EXPECT_FALSE(atoms(p.groups[i].formula).empty());
      for (std::size_t j = i + 1; j < p.groups.size(); ++j)
        for (const auto& m : p.groups[i].members) EXPECT_FALSE(p.groups[j].members.count(m)) << m;
    }
    std::set<std::string> ticked;
    for (const Branch& b : p.t.ticked_branches())
      for (const Formula& f : terminal_node(p.t, b))
        for (const auto& a : atoms(f)) ticked.insert(a);
    EXPECT_EQ(union_atoms(p.groups), ticked);
  }
}

// The disjunction of the group formulas falsifies the property exactly when
// the negated formula does, on every short trace over the chain graph variables.
TEST(Grouping, DisjunctionMatchesNegatedFormula) {
  Pipeline p = run(chain(), "G (I0 o<=5 O1)");
  std::vector<Formula> parts;
  for (const MonitorGroup& g : p.groups) parts.push_back(g.formula);
  Formula disj = make_chain(parts, Kind::Or);
  const std::vector<std::string> vars{"I0", "O0", "O1"};
  std::vector<Event> sigma;
  for (unsigned m = 0; m < 8; ++m)
    for (Cost c : {1, 3}) {
      Event e;
      e.cost = c;
      for (unsigned k = 0; k < vars.size(); ++k)
        if (m & (1u << k)) e.props.insert(vars[k]);
      sigma.push_back(e);
    }
  Trace cur;
  std::size_t checked = 0;
  std::function<void()> rec = [&] {
    if (!cur.empty()) {
      ASSERT_EQ(evaluate_trace(disj, cur), evaluate_trace(p.negated, cur));
      ++checked;
    }
    if (cur.size() == 4) return;
    for (const Event& e : sigma) {
      cur.events.push_back(e);
      rec();
      cur.events.pop_back();
    }
  };
  rec();
  EXPECT_GT(checked, 60000u);
}

TEST(Grouping, Json) {
  Pipeline p = run(fork_join(), "G ((I0 & I1) o<=20 Of)");
  auto j = groups_to_json(p.groups, assign_conjuncts(p.groups, p.u, p.g), p.u);
  ASSERT_EQ(j["groups"].size(), 7u);
  EXPECT_EQ(j["groups"][0]["members"][0], "p0");
  EXPECT_EQ(j["groups"][0]["processes"][0]["constraints"][0]["constraint"], 11);
}
