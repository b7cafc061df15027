#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mktsim/oracle_binding.hpp"
#include "mktsim/types.hpp"

namespace mktsim {

enum class StakeholderKind { User, Generator, Retriever, Router, Other };

std::string_view to_string(StakeholderKind kind);
StakeholderKind stakeholder_kind_from_string(std::string_view name);

struct Stakeholder {
  StakeholderId id;
  StakeholderKind kind = StakeholderKind::Other;
  std::vector<AgentId> agents;
};

struct Edge {
  StakeholderId from;
  StakeholderId to;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Step index used for "active from the start" / "never exits".
inline constexpr std::int64_t kFromStart = 1;
inline constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

struct AgentProfile {
  AgentId id;
  StakeholderId stakeholder;
  std::optional<OracleBinding> quality_model;
  double unit_cost = 0.0;
  double latency = 0.0;
  std::int64_t entry_step = kFromStart;
  std::int64_t exit_step = kNever;

  /// entry_step <= t < exit_step
  bool active_at(std::int64_t t) const noexcept { return entry_step <= t && t < exit_step; }
};

struct Query {
  QueryId id;
  std::optional<std::string> topic;
  std::optional<std::string> payload;
};

class QueryPool {
 public:
  QueryPool() = default;
  explicit QueryPool(std::vector<Query> items);

  std::span<const Query> items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  const Query& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::vector<Query> items_;
};

using AdjacencyMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Stakeholders and admissible selection edges. Immutable once built.
class GovernanceGraph {
 public:
  std::span<const Stakeholder> stakeholders() const noexcept { return stakeholders_; }
  std::span<const Edge> edges() const noexcept { return edges_; }

  /// Stakeholder indices in topological order (stable: ties resolved by declaration order).
  std::span<const std::size_t> topological_order() const noexcept { return topo_; }

  std::size_t index_of(const StakeholderId& id) const;
  const Stakeholder& stakeholder(const StakeholderId& id) const;
  const Stakeholder& user_stakeholder() const { return stakeholders_[user_index_]; }
  std::size_t user_index() const noexcept { return user_index_; }

  /// Declaration-ordered children of stakeholder `index`.
  std::span<const std::size_t> children(std::size_t index) const { return children_[index]; }

  bool has_edge(std::size_t from, std::size_t to) const;

  /// Stakeholder the agent belongs to; throws UnknownAgent.
  std::size_t stakeholder_of(const AgentId& agent) const;

 private:
  friend GovernanceGraph build_graph(std::vector<Stakeholder>, std::vector<Edge>);

  std::vector<Stakeholder> stakeholders_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> topo_;
  std::vector<std::vector<std::size_t>> children_;
  std::unordered_map<StakeholderId, std::size_t> index_;
  std::unordered_map<AgentId, std::size_t> agent_owner_;
  std::size_t user_index_ = 0;
};

/// Throws CycleDetected, UnknownStakeholder, NoUserStakeholder, UnreachableStakeholder
/// or DuplicateId.
GovernanceGraph build_graph(std::vector<Stakeholder> stakeholders, std::vector<Edge> edges);

/// W(x, y) = 1 iff x -> y, rows and columns in declaration order.
AdjacencyMatrix adjacency(std::span<const Stakeholder> stakeholders, std::span<const Edge> edges);
AdjacencyMatrix adjacency(const GovernanceGraph& graph);

/// Inverse of adjacency(): edges read back row-major.
std::vector<Edge> edges_from_adjacency(std::span<const Stakeholder> stakeholders,
                                       const AdjacencyMatrix& w);

/// Resolves agent ids to profiles. Agents without a profile (generated users) are
/// treated as always active.
class AgentDirectory {
 public:
  AgentDirectory() = default;
  explicit AgentDirectory(std::vector<AgentProfile> profiles);

  const AgentProfile* find(const AgentId& id) const;
  const AgentProfile& at(const AgentId& id) const;
  std::span<const AgentProfile> profiles() const noexcept { return profiles_; }

 private:
  std::vector<AgentProfile> profiles_;
  std::unordered_map<AgentId, std::size_t> index_;
};

/// Agents of `stakeholder` with entry_step <= t < exit_step, in declaration order.
std::vector<AgentId> active_agents(const GovernanceGraph& graph, const AgentDirectory& agents,
                                   const StakeholderId& stakeholder, std::int64_t t);

}  // namespace mktsim
