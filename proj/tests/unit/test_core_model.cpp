#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>

#include "mktsim/core_model.hpp"

using namespace mktsim;

namespace {

Stakeholder sh(const char* id, StakeholderKind kind, std::vector<AgentId> agents = {}) {
  return {id, kind, std::move(agents)};
}

std::vector<StakeholderId> topo_ids(const GovernanceGraph& g) {
  std::vector<StakeholderId> ids;
  for (auto i : g.topological_order()) ids.push_back(g.stakeholders()[i].id);
  return ids;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

std::vector<Stakeholder> fig3() {
  return {sh("U", StakeholderKind::User, {"u1"}), sh("G", StakeholderKind::Generator, {"g1"}),
          sh("R", StakeholderKind::Retriever, {"r1"}), sh("F", StakeholderKind::Router, {"f1"})};
}
std::vector<Edge> fig3_edges() { return {{"U", "G"}, {"G", "F"}, {"G", "R"}, {"F", "R"}}; }

}  // namespace

TEST(BuildGraph, TwoNodeChain) {
  auto g = build_graph({sh("U", StakeholderKind::User), sh("G", StakeholderKind::Generator)},
                       {{"U", "G"}});
  EXPECT_EQ(topo_ids(g), (std::vector<StakeholderId>{"U", "G"}));
}

TEST(BuildGraph, FourRoleTopology) {
  auto g = build_graph(fig3(), fig3_edges());
  EXPECT_EQ(topo_ids(g), (std::vector<StakeholderId>{"U", "G", "F", "R"}));
  EXPECT_EQ(g.stakeholder_of("f1"), g.index_of("F"));
}

TEST(BuildGraph, Rejections) {
  EXPECT_EQ(code_of([] {
              build_graph({sh("U", StakeholderKind::User), sh("G", StakeholderKind::Generator)},
                          {{"U", "G"}, {"G", "U"}});
            }),
            ErrorCode::CycleDetected);
  EXPECT_EQ(code_of([] {
              build_graph({sh("U", StakeholderKind::User), sh("G", StakeholderKind::Generator)},
                          {{"U", "X"}});
            }),
            ErrorCode::UnknownStakeholder);
  EXPECT_EQ(code_of([] {
              build_graph({sh("U", StakeholderKind::Generator), sh("G", StakeholderKind::Generator)},
                          {{"U", "G"}});
            }),
            ErrorCode::NoUserStakeholder);
  EXPECT_EQ(code_of([] {
              build_graph({sh("U", StakeholderKind::User), sh("G", StakeholderKind::Generator)}, {});
            }),
            ErrorCode::UnreachableStakeholder);
  EXPECT_EQ(code_of([] {
              build_graph({sh("U", StakeholderKind::User), sh("U", StakeholderKind::Generator)}, {});
            }),
            ErrorCode::DuplicateId);
  EXPECT_EQ(code_of([] {
              build_graph({sh("U", StakeholderKind::User, {"a"}),
                           sh("G", StakeholderKind::Generator, {"a"})},
                          {{"U", "G"}});
            }),
            ErrorCode::DuplicateId);
}

TEST(Adjacency, SingleEdgeAndEmpty) {
  std::vector<Stakeholder> s{sh("U", StakeholderKind::User), sh("G", StakeholderKind::Generator)};
  std::vector<Edge> one{{"U", "G"}};
  AdjacencyMatrix expected(2, 2);
  expected << 0, 1, 0, 0;
  EXPECT_EQ(adjacency(s, one), expected);
  EXPECT_EQ(adjacency(s, std::vector<Edge>{}), AdjacencyMatrix::Zero(2, 2));
}

TEST(Adjacency, FourRoleHasFourOnes) {
  auto g = build_graph(fig3(), fig3_edges());
  const auto w = adjacency(g);
  EXPECT_EQ(w.sum(), 4);
  EXPECT_EQ(w(g.index_of("G"), g.index_of("F")), 1);
  EXPECT_EQ(w(g.index_of("F"), g.index_of("G")), 0);
}

TEST(Adjacency, RoundTripsRandomDags) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 6);
    std::vector<Stakeholder> s;
    for (int i = 0; i < n; ++i) {
      s.push_back(sh(("s" + std::to_string(i)).c_str(),
                     i == 0 ? StakeholderKind::User : StakeholderKind::Generator));
    }
    // Random DAG over a shuffled rank; node 0 reaches everything through a spine.
    std::vector<int> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin() + 1, rank.end(), gen);
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({s[rank[i]].id, s[rank[i + 1]].id});
    for (int i = 0; i < n; ++i) {
      for (int j = i + 2; j < n; ++j) {
        if (gen() % 3 == 0) edges.push_back({s[rank[i]].id, s[rank[j]].id});
      }
    }
    std::shuffle(edges.begin(), edges.end(), gen);
    auto g = build_graph(s, edges);

    const auto order = g.topological_order();
    ASSERT_EQ(order.size(), static_cast<std::size_t>(n));
    std::vector<std::size_t> position(n);
    for (std::size_t k = 0; k < order.size(); ++k) position[order[k]] = k;
    for (const auto& e : edges) EXPECT_LT(position[g.index_of(e.from)], position[g.index_of(e.to)]);

    auto back = edges_from_adjacency(s, adjacency(g));
    auto sorted = [](std::vector<Edge> v) {
      std::sort(v.begin(), v.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.from, a.to) < std::tie(b.from, b.to);
      });
      return v;
    };
    EXPECT_EQ(sorted(back), sorted(edges));
  }
}

TEST(ActiveAgents, EntryAndExitBoundaries) {
  std::vector<AgentId> ids{"a", "b", "c", "d", "e", "f", "late", "gone"};
  auto g = build_graph({sh("U", StakeholderKind::User, {"u1"}), sh("G", StakeholderKind::Generator, ids)},
                       {{"U", "G"}});
  std::vector<AgentProfile> profiles;
  for (const auto& id : ids) profiles.push_back({id, "G"});
  profiles[6].entry_step = 101;
  profiles[7].exit_step = 50;
  AgentDirectory dir(profiles);

  EXPECT_EQ(active_agents(g, dir, "G", 49).size(), 7u);
  EXPECT_EQ(active_agents(g, dir, "G", 50).size(), 6u);  // exit is exclusive
  EXPECT_EQ(active_agents(g, dir, "G", 100).size(), 6u);
  const auto at101 = active_agents(g, dir, "G", 101);
  EXPECT_EQ(at101.size(), 7u);
  EXPECT_EQ(at101.back(), "late");
  EXPECT_EQ(active_agents(g, dir, "U", 1), (std::vector<AgentId>{"u1"}));
}

TEST(ActiveAgents, AppearanceImpliesEntryStep) {
  std::mt19937_64 gen(11);
  std::vector<AgentProfile> profiles;
  std::vector<AgentId> ids;
  for (int i = 0; i < 12; ++i) {
    AgentProfile p{"a" + std::to_string(i), "G"};
    p.entry_step = 1 + static_cast<std::int64_t>(gen() % 30);
    if (gen() % 2) p.exit_step = p.entry_step + 1 + static_cast<std::int64_t>(gen() % 30);
    ids.push_back(p.id);
    profiles.push_back(p);
  }
  auto g = build_graph({sh("U", StakeholderKind::User), sh("G", StakeholderKind::Generator, ids)},
                       {{"U", "G"}});
  AgentDirectory dir(profiles);
  for (std::int64_t t = 1; t < 70; ++t) {
    const auto now = active_agents(g, dir, "G", t);
    const auto next = active_agents(g, dir, "G", t + 1);
    for (const auto& a : next) {
      if (std::find(now.begin(), now.end(), a) == now.end()) EXPECT_EQ(dir.at(a).entry_step, t + 1);
    }
  }
}

TEST(QueryPool, RejectsDuplicateIds) {
  EXPECT_THROW(QueryPool({{"q1"}, {"q1"}}), Error);
  EXPECT_EQ(QueryPool({{"q1"}, {"q2"}}).size(), 2u);
}
