#pragma once

#include <optional>
#include <span>

#include "mktsim/core_model.hpp"
#include "mktsim/oracle_binding.hpp"
#include "mktsim/rng.hpp"

namespace mktsim {

struct UtilityCoefficients {
  double alpha = 1.0;  // quality weight
  double beta = 0.0;   // per cost unit
  double gamma = 0.0;  // per latency unit
};

/// Throws DomainError unless all coefficients are finite and non-negative.
void validate(const UtilityCoefficients& coeffs);

struct UtilityOutcome {
  double quality = 0.0;
  double cost = 0.0;
  double latency = 0.0;
  double mu = 0.0;

  friend bool operator==(const UtilityOutcome&, const UtilityOutcome&) = default;
};

/// What the oracle needs to know about one interaction to score it.
struct QualityKey {
  const Query* query = nullptr;
  AgentId agent;                     // quality-bearing agent
  std::optional<AgentId> retriever;  // retriever used by that agent, if any
};

/// cached_table: lookup; bernoulli: one draw; constant: q.
/// Throws MissingScore when a cached table lacks the key.
double score_quality(const OracleBinding& binding, const QualityKey& key, RandomStream& rng);

/// mu = alpha * Q - beta * C - gamma * L. Throws DomainError on Q outside [0, 1] or
/// negative C, L.
UtilityOutcome evaluate(const UtilityCoefficients& coeffs, double quality, double cost,
                        double latency);

/// Multiplicative/additive overrides applied to one agent's service signals.
struct ServiceAdjustment {
  double cost_multiplier = 1.0;
  double latency_multiplier = 1.0;
  double quality_delta = 0.0;
};

struct TrajectoryStep {
  const AgentProfile* profile = nullptr;
  StakeholderKind kind = StakeholderKind::Other;
  ServiceAdjustment adjustment{};
};

/// Picks the quality-bearing agent of a trajectory: the first generator, else the
/// deepest agent that is not a router. Returns the index into `trajectory`.
std::optional<std::size_t> quality_bearing_index(std::span<const TrajectoryStep> trajectory);

/// Scores one realized trajectory.
///
/// Q comes from the quality-bearing agent's binding (or `fallback` when the agent
/// declares none); when a retriever follows it on the trajectory and the table is
/// keyed by (generator, retriever), the composed key is used. Quality deltas of all
/// steps are added after scoring and the result is clamped to [0, 1]. C and L are
/// sums of the (adjusted) unit costs and latencies along the trajectory.
UtilityOutcome trajectory_utility(std::span<const TrajectoryStep> trajectory,
                                  const UtilityCoefficients& coeffs,
                                  const OracleBinding* fallback, const Query& query,
                                  RandomStream& rng);

}  // namespace mktsim
