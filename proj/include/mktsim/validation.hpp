#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mktsim/engine.hpp"
#include "mktsim/rng.hpp"

namespace mktsim {

/// Throws DomainError on non-positive multipliers.
void validate(const Perturbation& perturbation);

/// Baseline-minus-perturbed is reported as perturbed - baseline.
struct PairedDelta {
  std::uint64_t seed = 0;
  double mean_share = 0.0;                 // mean windowed share of the target over 1..T
  std::optional<double> retention;         // CR_target(m) at the end of the run
  double final_hhi = 0.0;                  // HHI(T; w)
};

struct PerturbationResult {
  Perturbation perturbation;
  std::vector<PairedDelta> deltas;
};

/// Runs baseline and perturbed scenarios under each seed. Needs >= 2 distinct seeds.
/// Seeds run concurrently on up to `threads` workers (0: hardware concurrency).
PerturbationResult perturb_and_compare(const ScenarioConfig& config, const Perturbation& perturbation,
                                       std::span<const std::uint64_t> seeds,
                                       unsigned threads = 0);

struct BootstrapResult {
  std::string statistic;
  double observed = 0.0;
  std::size_t resamples = 0;
  double asl = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool paired = true;
};

inline constexpr std::size_t kMinBootstrapResamples = 1000;

/// Bootstrap of mean(a) - mean(b).
///
/// Paired mode resamples index-aligned differences; unpaired resamples each side
/// independently. The one-sided ASL is the fraction of resampled differences on the
/// other side of zero from the observed one, ties counted half. CI bounds are the
/// 2.5% and 97.5% percentiles. Throws EmptySample, DomainError (resamples < 1000 or
/// paired with unequal lengths).
BootstrapResult bootstrap_asl(std::span<const double> samples_a, std::span<const double> samples_b,
                              std::size_t resamples, RandomStream& rng, bool paired = true,
                              std::string statistic = "mean_difference");

/// Kendall tau-a between two strict orderings of one agent set. Throws SetMismatch.
double rank_correlation(std::span<const AgentId> ranking_a, std::span<const AgentId> ranking_b);

/// Agents of the market ordered by cumulative share over the whole log (ties by id).
std::vector<AgentId> share_ranking(const SimulationLog& log, const ScenarioConfig& config);

}  // namespace mktsim
