#include "mktsim/policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mktsim {

void validate(const PolicyParams& p) {
  if (!(p.exploration_rate >= 0.0 && p.exploration_rate <= 1.0)) {
    throw Error(ErrorCode::DomainError, "exploration rate must lie in [0, 1]");
  }
  if (!(p.temperature > 0.0) || !std::isfinite(p.temperature)) {
    throw Error(ErrorCode::DomainError, "temperature must be positive");
  }
  if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) {
    throw Error(ErrorCode::DomainError, "learning rate must lie in (0, 1]");
  }
  if (!std::isfinite(p.initial_preference)) {
    throw Error(ErrorCode::DomainError, "initial preference must be finite");
  }
}

bool PreferenceTable::contains(const AgentId& agent) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == agent; });
}

double PreferenceTable::at(const AgentId& agent) const {
  for (const auto& [id, value] : entries_)
    if (id == agent) return value;
  throw Error(ErrorCode::UnknownAgent, "no preference entry for '" + agent + "'");
}

void PreferenceTable::set(const AgentId& agent, double value) {
  for (auto& [id, v] : entries_) {
    if (id == agent) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(agent, value);
}

bool PreferenceTable::erase(const AgentId& agent) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const auto& e) { return e.first == agent; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

double PreferenceTable::mean() const {
  double sum = 0.0;
  for (const auto& e : entries_) sum += e.second;
  return sum / static_cast<double>(entries_.size());
}

SelectorState::SelectorState(AgentId owner_id, PolicyParams p, std::span<const AgentId> candidates)
    : owner(std::move(owner_id)), params(p) {
  validate(params);
  auto& base = tables[""];
  for (const auto& c : candidates) base.set(c, params.initial_preference);
}

PreferenceTable& SelectorState::table_for(std::string_view topic) {
  if (!params.per_topic || topic.empty()) return tables[""];
  auto it = tables.find(std::string(topic));
  if (it != tables.end()) return it->second;
  PreferenceTable fresh;
  for (const auto& [agent, value] : tables[""]) fresh.set(agent, params.initial_preference);
  return tables.emplace(std::string(topic), std::move(fresh)).first->second;
}

const PreferenceTable* SelectorState::find_table(std::string_view topic) const {
  if (!params.per_topic || topic.empty()) {
    auto it = tables.find("");
    return it == tables.end() ? nullptr : &it->second;
  }
  auto it = tables.find(std::string(topic));
  return it == tables.end() ? nullptr : &it->second;
}

double SelectionDistribution::probability(const AgentId& agent) const {
  for (std::size_t i = 0; i < agents.size(); ++i)
    if (agents[i] == agent) return probabilities(static_cast<Eigen::Index>(i));
  return 0.0;
}

SelectionDistribution selection_distribution(const SelectorState& state,
                                             std::span<const AgentId> candidates,
                                             std::string_view topic) {
  if (candidates.empty()) {
    throw Error(ErrorCode::EmptyCandidateSet, "selector '" + state.owner + "' has no candidates");
  }
  const PreferenceTable* table = state.find_table(topic);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    // An unseen topic table reads as the initial preference everywhere.
    if (table == nullptr) {
      if (!state.find_table("")->contains(candidates[i])) {
        throw Error(ErrorCode::UnknownAgent, "no preference entry for '" + candidates[i] + "'");
      }
      theta(static_cast<Eigen::Index>(i)) = state.params.initial_preference;
    } else {
      theta(static_cast<Eigen::Index>(i)) = table->at(candidates[i]);
    }
  }
  return {std::vector<AgentId>(candidates.begin(), candidates.end()),
          epsilon_softmax(theta, state.params.exploration_rate, state.params.temperature)};
}

AgentId select(const SelectorState& state, std::span<const AgentId> candidates, RandomStream& rng,
               std::string_view topic) {
  auto dist = selection_distribution(state, candidates, topic);
  if (dist.agents.size() == 1) return dist.agents.front();  // no choice, no draw
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < dist.probabilities.size(); ++i) {
    cumulative += dist.probabilities(i);
    if (u < cumulative) return dist.agents[static_cast<std::size_t>(i)];
  }
  return dist.agents.back();
}

void update_in_place(SelectorState& state, const AgentId& chosen, double mu, std::string_view topic) {
  if (!std::isfinite(mu)) throw Error(ErrorCode::DomainError, "utility must be finite");
  if (!state.tables[""].contains(chosen)) {
    throw Error(ErrorCode::UnknownAgent,
                "selector '" + state.owner + "' has no preference for '" + chosen + "'");
  }
  auto& table = state.table_for(topic);
  const double eta = state.params.learning_rate;
  table.set(chosen, (1.0 - eta) * table.at(chosen) + eta * mu);
}

SelectorState update(SelectorState state, const AgentId& chosen, double mu, std::string_view topic) {
  update_in_place(state, chosen, mu, topic);
  return state;
}

void init_entrant_in_place(SelectorState& state, const AgentId& entrant) {
  auto& base = state.tables[""];
  if (base.contains(entrant)) {
    throw Error(ErrorCode::DuplicateAgent,
                "selector '" + state.owner + "' already tracks '" + entrant + "'");
  }
  for (auto& [topic, table] : state.tables) {
    table.set(entrant, table.empty() ? state.params.initial_preference : table.mean());
  }
}

SelectorState init_entrant(SelectorState state, const AgentId& entrant) {
  init_entrant_in_place(state, entrant);
  return state;
}

void remove_agent(SelectorState& state, const AgentId& agent) {
  for (auto& [topic, table] : state.tables) table.erase(agent);
}

}  // namespace mktsim
