#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mktsim/core_model.hpp"
#include "mktsim/oracle.hpp"
#include "mktsim/policies.hpp"
#include "mktsim/rng.hpp"

namespace mktsim {

enum class Sampling {
  WithoutReplacement,
  WithReplacement,
  // Without replacement within each pass over the pool; reshuffled when exhausted.
  Cycled,
};

enum class UpdateMode { Immediate, Synchronous };

enum class TargetExposureMode { Uniform, MeritStatic, MeritWindowed };

enum class PerturbationKnob { LatencyMultiplier, QualityDelta, CostMultiplier };

std::string_view to_string(Sampling sampling);
std::string_view to_string(UpdateMode mode);
std::string_view to_string(TargetExposureMode mode);
std::string_view to_string(PerturbationKnob knob);

struct Perturbation {
  AgentId target;
  PerturbationKnob knob = PerturbationKnob::QualityDelta;
  double magnitude = 0.0;
  std::int64_t active_from = 1;
};

struct UserPopulation {
  std::size_t count = 0;
  std::vector<UtilityCoefficients> coefficients;  // one per user

  /// "u1" ... "uN" in declaration order.
  static AgentId user_id(std::size_t index);
};

struct SimulationSettings {
  std::int64_t horizon = 0;     // T
  std::int64_t batch_size = 0;  // B
  std::uint64_t seed = 0;
  Sampling sampling = Sampling::WithoutReplacement;
  UpdateMode update_mode = UpdateMode::Immediate;
};

struct TargetExposureSpec {
  TargetExposureMode mode = TargetExposureMode::Uniform;
  std::map<AgentId, double> scores;  // merit_static only
};

struct MetricsSettings {
  std::int64_t window = 10;     // w
  std::int64_t retention_m = 10;
  TargetExposureSpec target_exposure;
  StakeholderId market;  // stakeholder whose agents compete for traffic
};

struct ScenarioConfig {
  GovernanceGraph graph;
  AgentDirectory agents;
  QueryPool pool;
  UserPopulation users;
  std::map<StakeholderId, PolicyParams> policies;  // missing entries use defaults
  std::optional<OracleBinding> default_oracle;
  SimulationSettings simulation;
  MetricsSettings metrics;
  std::vector<Perturbation> perturbations;

  const PolicyParams& policy_for(const StakeholderId& stakeholder) const;
  const UtilityCoefficients& coefficients_for(std::size_t user_index) const;
};

/// ConfigInvalid on the first failed constraint.
void validate(const ScenarioConfig& config);

struct InteractionRecord {
  std::int64_t t = 0;
  AgentId user;
  QueryId query;
  std::vector<AgentId> trajectory;  // selected agents, user excluded
  UtilityOutcome outcome;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

struct SimulationLog {
  std::string digest;
  std::vector<InteractionRecord> records;
  std::map<AgentId, SelectorState> final_states;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t t, std::size_t record_index, const std::string& message)
      : Error(ErrorCode::DivergenceAt, message), t_(t), index_(record_index) {}

  std::int64_t step() const noexcept { return t_; }
  std::size_t record_index() const noexcept { return index_; }

 private:
  std::int64_t t_;
  std::size_t index_;
};

/// One simulation instance. Sequential and single-owner.
class Engine {
 public:
  explicit Engine(ScenarioConfig config);

  /// Applies entry/exit for step t, then runs the step's B interactions. Steps must be
  /// issued in order 1, 2, ...; throws PoolExhausted, MissingScore.
  std::vector<InteractionRecord> step(std::int64_t t);

  const ScenarioConfig& config() const noexcept { return config_; }
  const std::map<AgentId, SelectorState>& selectors() const noexcept { return selectors_; }
  std::int64_t last_step() const noexcept { return last_step_; }

 private:
  struct PendingUpdate {
    AgentId selector;
    AgentId chosen;
    double mu;
    std::string topic;
  };

  void apply_schedule(std::int64_t t);
  std::vector<AgentId> candidates_for(std::size_t stakeholder_index, std::int64_t t) const;
  const Query& next_query(RandomStream& rng);
  void refill_pool();
  ServiceAdjustment adjustment_for(const AgentId& agent, std::int64_t t) const;
  std::string_view topic_key(const SelectorState& state, const Query& query) const;

  ScenarioConfig config_;
  std::vector<AgentId> users_;
  std::map<AgentId, SelectorState> selectors_;
  std::vector<std::size_t> pool_order_;
  std::size_t pool_cursor_ = 0;
  std::uint64_t pool_epoch_ = 0;
  std::int64_t last_step_ = 0;
};

/// Executes steps 1..T. Throws ConfigInvalid when validation fails.
SimulationLog run(const ScenarioConfig& config);

/// Re-runs `config` and checks every record against `log`. Throws DigestMismatch or
/// DivergenceError; returns the fresh log.
SimulationLog replay(const SimulationLog& log, const ScenarioConfig& config);

}  // namespace mktsim
