#include "mktsim/core_model.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <unordered_set>

namespace mktsim {

std::string_view to_string(StakeholderKind kind) {
  switch (kind) {
    case StakeholderKind::User: return "user";
    case StakeholderKind::Generator: return "generator";
    case StakeholderKind::Retriever: return "retriever";
    case StakeholderKind::Router: return "router";
    case StakeholderKind::Other: return "other";
  }
  return "other";
}

StakeholderKind stakeholder_kind_from_string(std::string_view name) {
  if (name == "user") return StakeholderKind::User;
  if (name == "generator") return StakeholderKind::Generator;
  if (name == "retriever") return StakeholderKind::Retriever;
  if (name == "router") return StakeholderKind::Router;
  if (name == "other") return StakeholderKind::Other;
  throw Error(ErrorCode::ConfigInvalid, "unknown stakeholder kind '" + std::string(name) + "'");
}

QueryPool::QueryPool(std::vector<Query> items) : items_(std::move(items)) {
  std::unordered_set<QueryId> seen;
  for (const auto& q : items_) {
    if (q.id.empty()) throw Error(ErrorCode::ConfigInvalid, "query id must be non-empty");
    if (!seen.insert(q.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate query id '" + q.id + "'");
    }
  }
}

std::size_t GovernanceGraph::index_of(const StakeholderId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorCode::UnknownStakeholder, "unknown stakeholder '" + id + "'");
  }
  return it->second;
}

const Stakeholder& GovernanceGraph::stakeholder(const StakeholderId& id) const {
  return stakeholders_[index_of(id)];
}

bool GovernanceGraph::has_edge(std::size_t from, std::size_t to) const {
  const auto& c = children_.at(from);
  return std::find(c.begin(), c.end(), to) != c.end();
}

std::size_t GovernanceGraph::stakeholder_of(const AgentId& agent) const {
  auto it = agent_owner_.find(agent);
  if (it == agent_owner_.end()) {
    throw Error(ErrorCode::UnknownAgent, "agent '" + agent + "' belongs to no stakeholder");
  }
  return it->second;
}

GovernanceGraph build_graph(std::vector<Stakeholder> stakeholders, std::vector<Edge> edges) {
  GovernanceGraph g;
  const std::size_t n = stakeholders.size();

  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = stakeholders[i];
    if (s.id.empty()) throw Error(ErrorCode::ConfigInvalid, "stakeholder id must be non-empty");
    if (!g.index_.emplace(s.id, i).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate stakeholder id '" + s.id + "'");
    }
    for (const auto& a : s.agents) {
      if (a.empty()) throw Error(ErrorCode::ConfigInvalid, "agent id must be non-empty");
      if (!g.agent_owner_.emplace(a, i).second) {
        throw Error(ErrorCode::DuplicateId, "agent '" + a + "' listed under two stakeholders");
      }
    }
  }

  std::size_t users = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (stakeholders[i].kind == StakeholderKind::User) {
      g.user_index_ = i;
      ++users;
    }
  }
  if (users != 1) {
    throw Error(ErrorCode::NoUserStakeholder,
                "expected exactly one user stakeholder, found " + std::to_string(users));
  }

  g.children_.assign(n, {});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : edges) {
    auto from = g.index_.find(e.from);
    auto to = g.index_.find(e.to);
    if (from == g.index_.end() || to == g.index_.end()) {
      const auto& missing = from == g.index_.end() ? e.from : e.to;
      throw Error(ErrorCode::UnknownStakeholder, "edge endpoint '" + missing + "' is not declared");
    }
    if (!seen.emplace(from->second, to->second).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate edge " + e.from + " -> " + e.to);
    }
    g.children_[from->second].push_back(to->second);
  }
  for (auto& c : g.children_) std::sort(c.begin(), c.end());

  // Kahn's algorithm; the ready set is ordered by declaration index.
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& c : g.children_)
    for (auto y : c) ++indegree[y];
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);
  while (!ready.empty()) {
    auto x = ready.top();
    ready.pop();
    g.topo_.push_back(x);
    for (auto y : g.children_[x])
      if (--indegree[y] == 0) ready.push(y);
  }
  if (g.topo_.size() != n) {
    throw Error(ErrorCode::CycleDetected, "governance edges contain a cycle");
  }

  std::vector<bool> reached(n, false);
  std::vector<std::size_t> stack{g.user_index_};
  reached[g.user_index_] = true;
  while (!stack.empty()) {
    auto x = stack.back();
    stack.pop_back();
    for (auto y : g.children_[x]) {
      if (!reached[y]) {
        reached[y] = true;
        stack.push_back(y);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!reached[i]) {
      throw Error(ErrorCode::UnreachableStakeholder,
                  "stakeholder '" + stakeholders[i].id + "' is unreachable from the user stakeholder");
    }
  }

  g.stakeholders_ = std::move(stakeholders);
  g.edges_ = std::move(edges);
  return g;
}

AdjacencyMatrix adjacency(std::span<const Stakeholder> stakeholders, std::span<const Edge> edges) {
  const auto n = static_cast<Eigen::Index>(stakeholders.size());
  AdjacencyMatrix w = AdjacencyMatrix::Zero(n, n);
  auto index = [&](const StakeholderId& id) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (stakeholders[i].id == id) return i;
    throw Error(ErrorCode::UnknownStakeholder, "unknown stakeholder '" + id + "'");
  };
  for (const auto& e : edges) w(index(e.from), index(e.to)) = 1;
  return w;
}

AdjacencyMatrix adjacency(const GovernanceGraph& graph) {
  return adjacency(graph.stakeholders(), graph.edges());
}

std::vector<Edge> edges_from_adjacency(std::span<const Stakeholder> stakeholders,
                                       const AdjacencyMatrix& w) {
  std::vector<Edge> edges;
  for (Eigen::Index x = 0; x < w.rows(); ++x)
    for (Eigen::Index y = 0; y < w.cols(); ++y)
      if (w(x, y) != 0) edges.push_back({stakeholders[x].id, stakeholders[y].id});
  return edges;
}

AgentDirectory::AgentDirectory(std::vector<AgentProfile> profiles) : profiles_(std::move(profiles)) {
  for (std::size_t i = 0; i < profiles_.size(); ++i) {
    const auto& p = profiles_[i];
    if (!index_.emplace(p.id, i).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate agent profile '" + p.id + "'");
    }
    if (!(p.unit_cost >= 0.0) || !(p.latency >= 0.0)) {
      throw Error(ErrorCode::DomainError, "agent '" + p.id + "' has negative cost or latency");
    }
    if (p.entry_step < 1) {
      throw Error(ErrorCode::DomainError, "agent '" + p.id + "' entry_step must be >= 1");
    }
    if (p.entry_step >= p.exit_step) {
      throw Error(ErrorCode::DomainError, "agent '" + p.id + "' must enter before it exits");
    }
  }
}

const AgentProfile* AgentDirectory::find(const AgentId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &profiles_[it->second];
}

const AgentProfile& AgentDirectory::at(const AgentId& id) const {
  if (const auto* p = find(id)) return *p;
  throw Error(ErrorCode::UnknownAgent, "no profile for agent '" + id + "'");
}

std::vector<AgentId> active_agents(const GovernanceGraph& graph, const AgentDirectory& agents,
                                   const StakeholderId& stakeholder, std::int64_t t) {
  if (t < 1) throw Error(ErrorCode::DomainError, "steps start at 1");
  std::vector<AgentId> out;
  for (const auto& a : graph.stakeholder(stakeholder).agents) {
    const auto* p = agents.find(a);
    if (p == nullptr || p->active_at(t)) out.push_back(a);
  }
  return out;
}

}  // namespace mktsim
