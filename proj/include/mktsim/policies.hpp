#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mktsim/rng.hpp"
#include "mktsim/types.hpp"

namespace mktsim {

struct PolicyParams {
  double exploration_rate = 0.05;  // epsilon
  double temperature = 0.1;        // tau
  double learning_rate = 0.1;      // eta
  double initial_preference = 0.5;
  bool per_topic = false;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// Throws DomainError unless epsilon in [0,1], tau > 0, eta in (0,1].
void validate(const PolicyParams& params);

/// Insertion-ordered preference values over downstream agents.
class PreferenceTable {
 public:
  bool contains(const AgentId& agent) const;
  double at(const AgentId& agent) const;
  void set(const AgentId& agent, double value);
  bool erase(const AgentId& agent);
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  double mean() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const PreferenceTable&, const PreferenceTable&) = default;

 private:
  std::vector<std::pair<AgentId, double>> entries_;
};

/// Preferences of one selecting agent. With `per_topic`, one table per topic is kept
/// and the untopical table (key "") serves queries without a topic.
struct SelectorState {
  AgentId owner;
  PolicyParams params;
  std::map<std::string, PreferenceTable> tables;

  SelectorState() = default;
  SelectorState(AgentId owner, PolicyParams params, std::span<const AgentId> candidates);

  /// Table used for `topic`; created from the untopical table's candidate set at the
  /// initial preference when missing.
  PreferenceTable& table_for(std::string_view topic);
  const PreferenceTable* find_table(std::string_view topic) const;

  friend bool operator==(const SelectorState&, const SelectorState&) = default;
};

/// p = eps / n + (1 - eps) * softmax(theta / tau), with max-subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> epsilon_softmax(
    const Eigen::MatrixBase<Derived>& theta, typename Derived::Scalar epsilon,
    typename Derived::Scalar temperature) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto n = theta.size();
  Vector weights = ((theta.array() - theta.maxCoeff()) / temperature).exp().matrix();
  Vector p = (Scalar(1) - epsilon) * weights / weights.sum();
  p.array() += epsilon / static_cast<Scalar>(n);
  return p;
}

struct SelectionDistribution {
  std::vector<AgentId> agents;
  Eigen::VectorXd probabilities;

  double probability(const AgentId& agent) const;
};

/// Throws EmptyCandidateSet, or UnknownAgent when a candidate has no preference entry.
SelectionDistribution selection_distribution(const SelectorState& state,
                                             std::span<const AgentId> candidates,
                                             std::string_view topic = {});

/// Inverse-CDF sample over `candidates` in the given order; exactly one draw.
AgentId select(const SelectorState& state, std::span<const AgentId> candidates,
               RandomStream& rng, std::string_view topic = {});

/// theta_chosen <- (1 - eta) theta_chosen + eta mu. Throws UnknownAgent.
SelectorState update(SelectorState state, const AgentId& chosen, double mu,
                     std::string_view topic = {});
void update_in_place(SelectorState& state, const AgentId& chosen, double mu,
                     std::string_view topic = {});

/// New entry at the mean of existing values (initial preference if none), in every
/// table. Throws DuplicateAgent.
SelectorState init_entrant(SelectorState state, const AgentId& entrant);
void init_entrant_in_place(SelectorState& state, const AgentId& entrant);

/// Drops an exited agent from every table; no-op when absent.
void remove_agent(SelectorState& state, const AgentId& agent);

}  // namespace mktsim
