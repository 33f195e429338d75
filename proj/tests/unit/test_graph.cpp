#include "ccmon/graph.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <random>

using namespace ccmon;

namespace {

const std::string kData = CCMON_DATA_DIR;

DependencyGraph chain() { return load_graph_file(kData + "/graphs/chain.json"); }
DependencyGraph fork_join() { return load_graph_file(kData + "/graphs/fork_join.json"); }

using Pids = std::vector<std::string>;

Pids pids_of(const std::vector<DependencyPath>& paths, std::size_t k) { return paths.at(k).pids(); }

}  // namespace

TEST(LoadGraph, ThreeProcessChain) {
  DependencyGraph g = chain();
  EXPECT_EQ(g.processes().size(), 3u);
  EXPECT_EQ(g.environment(), (std::set<std::string>{"I0"}));
  EXPECT_EQ(g.dependent(), (std::set<std::string>{"O0", "O1", "Of"}));
  EXPECT_EQ(g.edges(), (std::set<std::pair<std::string, std::string>>{{"p0", "p1"}, {"p1", "p2"}}));
}

TEST(LoadGraph, SelfWiringIsACycle) {
  const char* doc = R"({"processes":[{"pid":"p","inputs":["x"],"outputs":["x"],"cost":1}]})";
  try {
    load_graph(doc);
    FAIL();
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos) << e.what();
  }
}

TEST(LoadGraph, DuplicateProducer) {
  const char* doc = R"({"processes":[
    {"pid":"a","inputs":["I"],"outputs":["O0"],"cost":1},
    {"pid":"b","inputs":["I"],"outputs":["O0"],"cost":1},
    {"pid":"c","inputs":["O0"],"outputs":["Z"],"cost":1}]})";
  try {
    load_graph(doc);
    FAIL();
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("more than one producer"), std::string::npos) << e.what();
  }
}

TEST(LoadGraph, SchemaErrors) {
  EXPECT_THROW(load_graph("{"), GraphError);
  EXPECT_THROW(load_graph(R"({"procs":[]})"), GraphError);
  EXPECT_THROW(load_graph(R"({"processes":[{"pid":"a","inputs":[],"outputs":[],"cost":1,"colour":1}]})"), GraphError);
  EXPECT_THROW(load_graph(R"({"processes":[{"pid":"a","inputs":["x"],"outputs":["y"]}]})"), GraphError);
  EXPECT_THROW(load_graph(R"({"processes":[{"pid":"a","inputs":["x"],"outputs":["y"],"cost":1.5}]})"), GraphError);
  EXPECT_THROW(load_graph(R"({"processes":[
    {"pid":"a","inputs":["x"],"outputs":["y"],"cost":1},
    {"pid":"a","inputs":["y"],"outputs":["z"],"cost":1}]})"),
               GraphError);
  EXPECT_THROW(load_graph(R"({"processes":[
    {"pid":"a","inputs":["x"],"outputs":["y"],"cost":-1},
    {"pid":"b","inputs":["y"],"outputs":["z"],"cost":1}]})"),
               GraphError);
}

TEST(LoadGraph, DeclaredEnvironmentIsCrossChecked) {
  EXPECT_THROW(load_graph(R"({"environment":["x","q"],"processes":[
    {"pid":"a","inputs":["x"],"outputs":["y"],"cost":1},
    {"pid":"b","inputs":["y"],"outputs":["z"],"cost":1}]})"),
               GraphError);
  EXPECT_THROW(load_graph(R"({"environment":[],"processes":[
    {"pid":"a","inputs":["x"],"outputs":["y"],"cost":1},
    {"pid":"b","inputs":["y"],"outputs":["z"],"cost":1}]})"),
               GraphError);
}

TEST(Validate, ForkJoinIsValid) {
  DependencyGraph g = fork_join();
  EXPECT_NO_THROW(g.validate());
  EXPECT_EQ(g.processes().size(), 7u);
  EXPECT_EQ(g.environment(), (std::set<std::string>{"I0", "I1"}));
}

TEST(Validate, CycleIsListed) {
  DependencyGraph g({{"p1", {"I"}, {"a"}, 1}, {"p2", {"a", "d"}, {"b"}, 1}, {"p4", {"b"}, {"d"}, 1}});
  try {
    g.validate();
    FAIL();
  } catch (const GraphError& e) {
    EXPECT_NE(std::string(e.what()).find("p2 -> p4 -> p2"), std::string::npos) << e.what();
  }
}

TEST(Validate, EmptyGraphIsValid) { EXPECT_NO_THROW(DependencyGraph().validate()); }

TEST(Validate, IsolatedProcessRejected) {
  DependencyGraph g({{"solo", {"I"}, {"O"}, 1}});
  EXPECT_THROW(g.validate(), GraphError);
  EXPECT_THROW(g.classify("solo"), GraphError);
}

TEST(Classify, Categories) {
  DependencyGraph g = fork_join();
  EXPECT_EQ(g.classify("p0"), ProcessRole::Source);
  EXPECT_EQ(g.classify("p2"), ProcessRole::Intermediate);
  EXPECT_EQ(g.classify("p6"), ProcessRole::Sink);
  EXPECT_EQ(chain().classify("p1"), ProcessRole::Intermediate);
  EXPECT_THROW(g.classify("p9"), GraphError);
}

TEST(Classify, PartitionsEveryProcess) {
  DependencyGraph g = fork_join();
  std::map<ProcessRole, int> n;
  for (const Process& p : g.processes()) ++n[g.classify(p.pid)];
  EXPECT_EQ(n[ProcessRole::Source], 2);
  EXPECT_EQ(n[ProcessRole::Intermediate], 4);
  EXPECT_EQ(n[ProcessRole::Sink], 1);
}

TEST(DependencyPaths, FromSourceToSink) {
  DependencyGraph g = fork_join();
  auto paths = g.paths_from("p0", "Of");
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(pids_of(paths, 0), (Pids{"p0", "p2", "p4", "p6"}));
  EXPECT_EQ(pids_of(paths, 1), (Pids{"p0", "p3", "p5", "p6"}));
}

TEST(DependencyPaths, ProducerPathIsItself) {
  DependencyGraph g = fork_join();
  auto own = g.paths_from("p1", "O1");
  ASSERT_EQ(own.size(), 1u);
  EXPECT_EQ(pids_of(own, 0), (Pids{"p1"}));
  auto to_sink = g.paths_from("p1", "Of");
  ASSERT_EQ(to_sink.size(), 1u);
  EXPECT_EQ(pids_of(to_sink, 0), (Pids{"p1", "p6"}));
}

TEST(DependencyPaths, EnvironmentHasNone) { EXPECT_TRUE(fork_join().dependency_paths("I0").empty()); }

TEST(DependencyPaths, AllPathsLexicographic) {
  auto paths = fork_join().dependency_paths("Of");
  std::vector<Pids> got;
  for (const auto& p : paths) got.push_back(p.pids());
  std::vector<Pids> want{{"p0", "p2", "p4", "p6"}, {"p0", "p3", "p5", "p6"}, {"p1", "p6"}, {"p2", "p4", "p6"},
                         {"p3", "p5", "p6"},       {"p4", "p6"},             {"p5", "p6"}, {"p6"}};
  EXPECT_EQ(got, want);
}

TEST(DependencyPaths, NaturalPidOrder) {
  EXPECT_TRUE(natural_less("p2", "p10"));
  EXPECT_FALSE(natural_less("p10", "p2"));
  EXPECT_TRUE(natural_less("BBR", "BCP"));
  EXPECT_FALSE(natural_less("p1", "p1"));
}

TEST(PathCost, Examples) {
  DependencyGraph g = fork_join();
  DependencyPath p{{g.process("p2"), g.process("p4"), g.process("p6")}};
  EXPECT_EQ(path_cost(p), 9);
  EXPECT_EQ(path_cost(DependencyPath{}), 0);
  EXPECT_EQ(path_cost(DependencyPath{{g.process("p6")}}), 4);
}

TEST(DependencyPaths, EveryAncestorHasAPath) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    std::vector<Process> ps;
    for (int i = 0; i < n; ++i) {
      Process p{"p" + std::to_string(i), {}, {"O" + std::to_string(i)}, static_cast<Cost>(rng() % 4)};
      if (i == 0) p.inputs.push_back("I");
      for (int j = 0; j < i; ++j)
        if (rng() % 2) p.inputs.push_back("O" + std::to_string(j));
      if (p.inputs.empty()) p.inputs.push_back(i > 0 ? "O" + std::to_string(i - 1) : "I");
      ps.push_back(p);
    }
    DependencyGraph g(ps);
    ASSERT_NO_THROW(g.validate());
    for (const std::string& v : g.dependent()) {
      std::set<std::string> ancestors;
      for (const auto& path : g.dependency_paths(v)) {
        EXPECT_LE(path.procs.size(), ps.size());
        ancestors.insert(path.procs.front().pid);
      }
      for (const std::string& a : ancestors) EXPECT_FALSE(g.paths_from(a, v).empty());
    }
    auto order = g.topological_order();
    EXPECT_EQ(order.size(), ps.size());
  }
}

TEST(GraphJson, RoundTrip) {
  DependencyGraph g = fork_join();
  DependencyGraph h = graph_from_json(graph_to_json(g));
  EXPECT_EQ(h.edges(), g.edges());
  EXPECT_EQ(h.environment(), g.environment());
}
