#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mktsim/engine.hpp"

namespace mktsim {

// ---------------------------------------------------------------------------
// Dense kernels. Work on any Eigen vector expression; shares are fractions.
// ---------------------------------------------------------------------------

/// Sum of squared shares (fractional scale).
template <typename Derived>
typename Derived::Scalar exposure_disparity(const Eigen::MatrixBase<Derived>& shares) {
  return shares.squaredNorm();
}

/// Conventional 0-10000 HHI.
template <typename Derived>
typename Derived::Scalar hhi(const Eigen::MatrixBase<Derived>& shares) {
  return typename Derived::Scalar(10000) * exposure_disparity(shares);
}

/// Squared L2 distance between realized and target shares.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar expected_exposure(const Eigen::MatrixBase<DerivedA>& shares,
                                            const Eigen::MatrixBase<DerivedB>& target) {
  return (shares - target).squaredNorm();
}

/// Index of the largest share; ties go to the smallest id.
template <typename Derived>
Eigen::Index top_index(const Eigen::MatrixBase<Derived>& shares, std::span<const AgentId> ids) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < shares.size(); ++i) {
    if (shares(i) > shares(best) || (shares(i) == shares(best) && ids[i] < ids[best])) {
      best = i;
    }
  }
  return best;
}

template <typename Derived>
bool is_normalized(const Eigen::MatrixBase<Derived>& shares, double tolerance = 1e-9) {
  return shares.size() > 0 && (shares.array() >= 0).all() &&
         std::abs(static_cast<double>(shares.sum()) - 1.0) <= tolerance;
}

// ---------------------------------------------------------------------------
// Keyed values
// ---------------------------------------------------------------------------

/// Agent-indexed real values (shares, scores, targets) in a fixed agent order.
struct AgentValues {
  std::vector<AgentId> agents;
  Eigen::VectorXd values;

  AgentValues() = default;
  AgentValues(std::vector<AgentId> ids, Eigen::VectorXd v);
  AgentValues(std::initializer_list<std::pair<AgentId, double>> entries);

  std::size_t size() const noexcept { return agents.size(); }
  std::optional<std::size_t> find(const AgentId& agent) const;
  double at(const AgentId& agent) const;

  /// Values reordered to `order`; agents absent here read as `missing`.
  Eigen::VectorXd aligned_to(std::span<const AgentId> order, double missing = 0.0) const;
};

struct TargetExposure {
  TargetExposureMode mode = TargetExposureMode::Uniform;
  AgentValues epsilon_star;
};

/// Throws NotNormalized.
double hhi(const AgentValues& shares);
/// Throws NotNormalized.
double exposure_disparity(const AgentValues& shares);

/// epsilon*_a = score_a / sum. Throws AllZeroScores (or DomainError on a negative score).
TargetExposure fair_share(const AgentValues& scores);
TargetExposure uniform_exposure(std::span<const AgentId> agents);

/// Top agent's share minus its target. Throws MismatchedAgents.
double dominance_gap(const AgentValues& shares, const AgentValues& target);
/// max over agents of (share - target); the alternative reading of the gap.
double max_share_gap(const AgentValues& shares, const AgentValues& target);
double expected_exposure(const AgentValues& shares, const AgentValues& target);
AgentValues fair_share_delta(const AgentValues& shares, const AgentValues& target);

// ---------------------------------------------------------------------------
// Log-derived metrics
// ---------------------------------------------------------------------------

/// Per-step traffic counts for one market, used for windowed queries.
class TrafficIndex {
 public:
  TrafficIndex(std::span<const InteractionRecord> records, std::vector<AgentId> market_agents,
               std::int64_t horizon);

  std::span<const AgentId> agents() const noexcept { return agents_; }
  const std::vector<AgentId>& agents_vector() const noexcept { return agents_; }
  std::int64_t horizon() const noexcept { return horizon_; }

  /// Shares over steps max(1, t-w+1)..t for every market agent. Throws EmptyWindow.
  AgentValues market_share(std::int64_t t, std::int64_t w) const;

  /// Interactions reaching the market in the window, and per-agent counts.
  double window_total(std::int64_t t, std::int64_t w) const;
  Eigen::VectorXd window_counts(std::int64_t t, std::int64_t w) const;

  /// Sum of mu accrued by each agent in the window.
  Eigen::VectorXd window_utility(std::int64_t t, std::int64_t w) const;

 private:
  Eigen::Index first_row(std::int64_t t, std::int64_t w) const;

  std::vector<AgentId> agents_;
  std::int64_t horizon_;
  // Row k holds cumulative sums through step k (row 0 is zero).
  Eigen::MatrixXd cumulative_counts_;
  Eigen::MatrixXd cumulative_utility_;
  Eigen::VectorXd cumulative_total_;
};

AgentValues market_share(std::span<const InteractionRecord> records,
                         std::span<const AgentId> market_agents, std::int64_t t,
                         std::int64_t w);

/// Fraction of the user's next min(m, remaining) interactions after first adoption
/// that again select `agent`; nullopt when never adopted or nothing follows.
std::optional<double> retention_user(std::span<const InteractionRecord> records,
                                     const AgentId& user, const AgentId& agent,
                                     std::int64_t m);

struct AgentRetention {
  std::optional<double> value;
  std::size_t adopters = 0;
};

/// Mean of the defined user-level retentions over adopters.
AgentRetention retention_agent(std::span<const InteractionRecord> records, const AgentId& agent,
                               std::int64_t m);

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct StepMetrics {
  std::int64_t t = 0;
  bool has_traffic = true;
  AgentValues shares;         // agents active at t or with traffic in the window
  AgentValues epsilon_star;   // same agent order
  double hhi = 0.0;
  double eed = 0.0;
  double dominance_gap = 0.0;
  double max_share_gap = 0.0;
  double ee = 0.0;
};

struct RetentionRow {
  AgentId agent;
  std::int64_t m = 0;
  AgentRetention retention;
};

struct FairShareRow {
  AgentId agent;
  double score = 0.0;
  double epsilon_star = 0.0;
  double delta_fs = 0.0;
};

/// Stretch of steps with a constant active agent set.
struct Period {
  std::int64_t from = 0;
  std::int64_t to = 0;
  AgentValues shares;
  AgentValues epsilon_star;
  AgentValues delta_fs;
  double hhi = 0.0;
};

struct MetricsReport {
  StakeholderId market;
  std::int64_t window = 0;
  std::vector<StepMetrics> series;
  std::vector<RetentionRow> retention;
  std::vector<FairShareRow> fair_share;
  std::vector<Period> periods;
};

/// Target exposure over `active` agents at step t.
TargetExposure target_exposure(const ScenarioConfig& config, const TrafficIndex& traffic,
                               std::span<const AgentId> active, std::int64_t t);

MetricsReport compute_report(const SimulationLog& log, const ScenarioConfig& config);

/// CSV bodies, header rows included. Undefined retentions are empty cells.
std::string market_share_csv(const MetricsReport& report);
std::string concentration_csv(const MetricsReport& report);
std::string retention_csv(const MetricsReport& report);
std::string fair_share_csv(const MetricsReport& report);
std::string summary_json(const MetricsReport& report, const std::string& digest);

/// Writes the four CSVs and summary.json into `dir`.
void write_report(const MetricsReport& report, const std::string& digest,
                  const std::string& dir);

}  // namespace mktsim
