#include "mktsim/validation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include "mktsim/metrics.hpp"

namespace mktsim {

void validate(const Perturbation& p) {
  if (!std::isfinite(p.magnitude)) throw Error(ErrorCode::DomainError, "perturbation magnitude must be finite");
  if (p.knob != PerturbationKnob::QualityDelta && !(p.magnitude > 0.0)) {
    throw Error(ErrorCode::DomainError, "latency and cost multipliers must be positive");
  }
  if (p.active_from < 1) throw Error(ErrorCode::DomainError, "active_from must be >= 1");
}

namespace {

struct RunSummary {
  double mean_share = 0.0;
  std::optional<double> retention;
  double final_hhi = 0.0;
};

RunSummary summarize(const SimulationLog& log, const ScenarioConfig& config, const AgentId& target) {
  const auto horizon = config.simulation.horizon;
  const auto w = config.metrics.window;
  RunSummary s;

  const auto& peers = config.graph.stakeholders()[config.graph.stakeholder_of(target)].agents;
  TrafficIndex own(log.records, peers, horizon);
  const auto column = static_cast<Eigen::Index>(
      std::find(peers.begin(), peers.end(), target) - peers.begin());
  double sum = 0.0;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    const double total = own.window_total(t, w);
    if (total > 0.0) sum += own.window_counts(t, w)(column) / total;
  }
  s.mean_share = sum / static_cast<double>(horizon);
  s.retention = retention_agent(log.records, target, config.metrics.retention_m).value;

  const auto& market = config.graph.stakeholder(config.metrics.market).agents;
  TrafficIndex traffic(log.records, market, horizon);
  if (traffic.window_total(horizon, w) > 0.0) s.final_hhi = hhi(traffic.market_share(horizon, w).values);
  return s;
}

}  // namespace

PerturbationResult perturb_and_compare(const ScenarioConfig& config, const Perturbation& perturbation,
                                       std::span<const std::uint64_t> seeds, unsigned threads) {
  validate(perturbation);
  if (config.agents.find(perturbation.target) == nullptr) {
    throw Error(ErrorCode::UnknownAgent, "perturbation target '" + perturbation.target + "' unknown");
  }
  if (seeds.size() < 2) throw Error(ErrorCode::DomainError, "perturbation runs need at least two seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw Error(ErrorCode::DomainError, "seeds must be distinct");
  }

  PerturbationResult result;
  result.perturbation = perturbation;
  result.deltas.resize(seeds.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        ScenarioConfig base = config;
        base.simulation.seed = seeds[i];
        ScenarioConfig perturbed = base;
        perturbed.perturbations.push_back(perturbation);
        const auto b = summarize(run(base), base, perturbation.target);
        const auto p = summarize(run(perturbed), perturbed, perturbation.target);
        PairedDelta d;
        d.seed = seeds[i];
        d.mean_share = p.mean_share - b.mean_share;
        if (b.retention && p.retention) d.retention = *p.retention - *b.retention;
        d.final_hhi = p.final_hhi - b.final_hhi;
        result.deltas[i] = d;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(seeds.size()));
  std::vector<std::jthread> pool;
  for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return result;
}

namespace {

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double percentile(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapResult bootstrap_asl(std::span<const double> a, std::span<const double> b,
                              std::size_t resamples, RandomStream& rng, bool paired,
                              std::string statistic) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "bootstrap samples must be non-empty");
  if (resamples < kMinBootstrapResamples) {
    throw Error(ErrorCode::DomainError,
                "bootstrap needs at least " + std::to_string(kMinBootstrapResamples) + " resamples");
  }
  if (paired && a.size() != b.size()) {
    throw Error(ErrorCode::DomainError, "paired bootstrap needs samples of equal length");
  }

  BootstrapResult r;
  r.statistic = std::move(statistic);
  r.resamples = resamples;
  r.paired = paired;
  r.observed = mean(a) - mean(b);

  std::vector<double> diffs;
  diffs.reserve(resamples);
  if (paired) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    for (std::size_t k = 0; k < resamples; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) s += d[rng.below(d.size())];
      diffs.push_back(s / static_cast<double>(d.size()));
    }
  } else {
    for (std::size_t k = 0; k < resamples; ++k) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) sa += a[rng.below(a.size())];
      for (std::size_t i = 0; i < b.size(); ++i) sb += b[rng.below(b.size())];
      diffs.push_back(sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size()));
    }
  }

  double opposite = 0.0;
  for (double d : diffs) {
    if (d == 0.0) opposite += 0.5;
    else if (r.observed >= 0.0 ? d < 0.0 : d > 0.0) opposite += 1.0;
  }
  r.asl = opposite / static_cast<double>(resamples);

  std::sort(diffs.begin(), diffs.end());
  r.ci_low = percentile(diffs, 0.025);
  r.ci_high = percentile(diffs, 0.975);
  return r;
}

double rank_correlation(std::span<const AgentId> ranking_a, std::span<const AgentId> ranking_b) {
  if (ranking_a.size() != ranking_b.size()) {
    throw Error(ErrorCode::SetMismatch, "rankings differ in length");
  }
  std::unordered_map<AgentId, std::size_t> position;
  for (std::size_t i = 0; i < ranking_b.size(); ++i) {
    if (!position.emplace(ranking_b[i], i).second) {
      throw Error(ErrorCode::SetMismatch, "duplicate agent '" + ranking_b[i] + "'");
    }
  }
  std::vector<std::size_t> mapped;
  std::set<AgentId> seen;
  for (const auto& a : ranking_a) {
    if (!seen.insert(a).second) throw Error(ErrorCode::SetMismatch, "duplicate agent '" + a + "'");
    auto it = position.find(a);
    if (it == position.end()) throw Error(ErrorCode::SetMismatch, "agent '" + a + "' missing from one ranking");
    mapped.push_back(it->second);
  }
  const std::size_t n = mapped.size();
  if (n < 2) return 1.0;
  long long concordant_minus_discordant = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      concordant_minus_discordant += mapped[i] < mapped[j] ? 1 : -1;
  return static_cast<double>(concordant_minus_discordant) / (static_cast<double>(n * (n - 1)) / 2.0);
}

std::vector<AgentId> share_ranking(const SimulationLog& log, const ScenarioConfig& config) {
  const auto& market = config.graph.stakeholder(config.metrics.market).agents;
  const auto horizon = config.simulation.horizon;
  TrafficIndex traffic(log.records, market, horizon);
  const auto counts = traffic.window_counts(horizon, horizon);
  std::vector<std::size_t> order(market.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const auto cx = counts(static_cast<Eigen::Index>(x));
    const auto cy = counts(static_cast<Eigen::Index>(y));
    return cx != cy ? cx > cy : market[x] < market[y];
  });
  std::vector<AgentId> out;
  for (auto i : order) out.push_back(market[i]);
  return out;
}

}  // namespace mktsim
