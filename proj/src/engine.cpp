#include "mktsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mktsim/config.hpp"
#include "mktsim/io.hpp"

namespace mktsim {

std::string_view to_string(Sampling sampling) {
  switch (sampling) {
    case Sampling::WithoutReplacement: return "without_replacement";
    case Sampling::WithReplacement: return "with_replacement";
    case Sampling::Cycled: return "cycled";
  }
  return "without_replacement";
}

std::string_view to_string(UpdateMode mode) {
  return mode == UpdateMode::Immediate ? "async" : "sync";
}

std::string_view to_string(TargetExposureMode mode) {
  switch (mode) {
    case TargetExposureMode::Uniform: return "uniform";
    case TargetExposureMode::MeritStatic: return "merit_static";
    case TargetExposureMode::MeritWindowed: return "merit_windowed";
  }
  return "uniform";
}

std::string_view to_string(PerturbationKnob knob) {
  switch (knob) {
    case PerturbationKnob::LatencyMultiplier: return "latency_multiplier";
    case PerturbationKnob::QualityDelta: return "quality_delta";
    case PerturbationKnob::CostMultiplier: return "cost_multiplier";
  }
  return "quality_delta";
}

AgentId UserPopulation::user_id(std::size_t index) { return "u" + std::to_string(index + 1); }

const PolicyParams& ScenarioConfig::policy_for(const StakeholderId& stakeholder) const {
  static const PolicyParams defaults{};
  auto it = policies.find(stakeholder);
  return it == policies.end() ? defaults : it->second;
}

const UtilityCoefficients& ScenarioConfig::coefficients_for(std::size_t user_index) const {
  return users.coefficients.at(user_index);
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

}  // namespace

void validate(const ScenarioConfig& c) {
  const auto& sim = c.simulation;
  if (sim.horizon < 1) invalid("simulation.T must be >= 1");
  if (sim.batch_size < 1) invalid("simulation.B must be >= 1");

  const auto& users = c.graph.user_stakeholder();
  if (users.agents.size() != c.users.count) {
    invalid("users.count does not match the user stakeholder's agents");
  }
  if (static_cast<std::size_t>(sim.batch_size) > c.users.count) {
    invalid("simulation.B must not exceed users.count");
  }
  if (c.users.coefficients.size() != c.users.count) {
    invalid("users.coefficients must give one entry per user");
  }
  for (const auto& coeffs : c.users.coefficients) {
    try {
      validate(coeffs);
    } catch (const Error& e) {
      invalid(std::string("users.coefficients: ") + e.what());
    }
  }

  if (c.pool.size() == 0) invalid("pool must contain at least one query");
  if (sim.sampling == Sampling::WithoutReplacement &&
      c.pool.size() < static_cast<std::size_t>(sim.horizon) * static_cast<std::size_t>(sim.batch_size)) {
    invalid("pool: without_replacement needs at least T*B queries (have " +
            std::to_string(c.pool.size()) + ", need " +
            std::to_string(sim.horizon * sim.batch_size) + ")");
  }

  if (c.metrics.window < 1 || c.metrics.window > sim.horizon) invalid("metrics.w must lie in [1, T]");
  if (c.metrics.retention_m < 1) invalid("metrics.m must be >= 1");

  for (const auto& s : c.graph.stakeholders()) {
    try {
      validate(c.policy_for(s.id));
    } catch (const Error& e) {
      invalid("policy of '" + s.id + "': " + e.what());
    }
    if (s.kind == StakeholderKind::User) continue;
    for (const auto& a : s.agents) {
      const auto* p = c.agents.find(a);
      if (p == nullptr) invalid("agent '" + a + "' has no profile");
      if (p->stakeholder != s.id) invalid("agent '" + a + "' declared under another stakeholder");
    }
  }
  for (const auto& p : c.agents.profiles()) {
    std::size_t owner = 0;
    try {
      owner = c.graph.stakeholder_of(p.id);
    } catch (const Error&) {
      invalid("agent '" + p.id + "' is not listed by its stakeholder");
    }
    if (c.graph.stakeholders()[owner].kind == StakeholderKind::User) {
      invalid("agent '" + p.id + "' cannot be a user");
    }
    if (p.quality_model) {
      try {
        validate(*p.quality_model);
      } catch (const Error& e) {
        invalid("agent '" + p.id + "' quality_model: " + e.what());
      }
    }
  }
  if (c.default_oracle) validate(*c.default_oracle);

  if (c.metrics.market.empty()) invalid("metrics.market must name a stakeholder");
  try {
    const auto& market = c.graph.stakeholder(c.metrics.market);
    if (market.kind == StakeholderKind::User) invalid("metrics.market cannot be the user stakeholder");
    if (c.metrics.target_exposure.mode == TargetExposureMode::MeritStatic) {
      bool positive = false;
      for (const auto& a : market.agents) {
        auto it = c.metrics.target_exposure.scores.find(a);
        if (it == c.metrics.target_exposure.scores.end()) {
          invalid("metrics.target_exposure.scores lacks agent '" + a + "'");
        }
        if (!(it->second >= 0.0) || !std::isfinite(it->second)) {
          invalid("metrics.target_exposure.scores must be non-negative");
        }
        positive = positive || it->second > 0.0;
      }
      if (!positive) invalid("metrics.target_exposure.scores are all zero");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    invalid(std::string("metrics.market: ") + e.what());
  }

  for (const auto& p : c.perturbations) {
    if (c.agents.find(p.target) == nullptr) invalid("perturbation target '" + p.target + "' unknown");
    if (p.knob != PerturbationKnob::QualityDelta && !(p.magnitude > 0.0)) {
      invalid("perturbation multipliers must be positive");
    }
    if (!std::isfinite(p.magnitude)) invalid("perturbation magnitude must be finite");
    if (p.active_from < 1) invalid("perturbation active_from must be >= 1");
  }
}

Engine::Engine(ScenarioConfig config) : config_(std::move(config)) {
  validate(config_);
  users_ = config_.graph.user_stakeholder().agents;

  const auto stakeholders = config_.graph.stakeholders();
  for (std::size_t x = 0; x < stakeholders.size(); ++x) {
    if (config_.graph.children(x).empty()) continue;
    const auto candidates = candidates_for(x, 1);
    for (const auto& a : stakeholders[x].agents) {
      const auto* p = config_.agents.find(a);
      if (p != nullptr && !p->active_at(1)) continue;
      selectors_.emplace(a, SelectorState(a, config_.policy_for(stakeholders[x].id), candidates));
    }
  }

  if (config_.simulation.sampling != Sampling::WithReplacement) refill_pool();
}

std::vector<AgentId> Engine::candidates_for(std::size_t stakeholder_index, std::int64_t t) const {
  std::vector<AgentId> out;
  for (auto child : config_.graph.children(stakeholder_index)) {
    auto agents = active_agents(config_.graph, config_.agents,
                                config_.graph.stakeholders()[child].id, t);
    out.insert(out.end(), agents.begin(), agents.end());
  }
  return out;
}

void Engine::refill_pool() {
  RandomStream rng(config_.simulation.seed, StreamDomain::Pool, pool_epoch_++);
  pool_order_.resize(config_.pool.size());
  std::iota(pool_order_.begin(), pool_order_.end(), std::size_t{0});
  for (std::size_t i = pool_order_.size(); i > 1; --i) {
    std::swap(pool_order_[i - 1], pool_order_[rng.below(i)]);
  }
  pool_cursor_ = 0;
}

const Query& Engine::next_query(RandomStream& rng) {
  switch (config_.simulation.sampling) {
    case Sampling::WithReplacement:
      return config_.pool[rng.below(config_.pool.size())];
    case Sampling::Cycled:
      if (pool_cursor_ >= pool_order_.size()) refill_pool();
      break;
    case Sampling::WithoutReplacement:
      if (pool_cursor_ >= pool_order_.size()) {
        throw Error(ErrorCode::PoolExhausted, "query pool exhausted at step " +
                                                  std::to_string(last_step_ + 1));
      }
      break;
  }
  return config_.pool[pool_order_[pool_cursor_++]];
}

void Engine::apply_schedule(std::int64_t t) {
  const auto& graph = config_.graph;
  auto parents_of = [&](std::size_t y) {
    std::vector<std::size_t> parents;
    for (std::size_t x = 0; x < graph.stakeholders().size(); ++x)
      if (graph.has_edge(x, y)) parents.push_back(x);
    return parents;
  };
  auto for_each_parent_selector = [&](const AgentProfile& p, auto&& fn) {
    for (auto x : parents_of(graph.index_of(p.stakeholder))) {
      for (const auto& a : graph.stakeholders()[x].agents) {
        if (auto it = selectors_.find(a); it != selectors_.end()) fn(it->second);
      }
    }
  };

  for (const auto& p : config_.agents.profiles()) {
    if (p.exit_step == t) {
      for_each_parent_selector(p, [&](SelectorState& s) { remove_agent(s, p.id); });
    }
  }
  std::vector<const AgentProfile*> entrants;
  for (const auto& p : config_.agents.profiles()) {
    if (p.entry_step != t) continue;
    entrants.push_back(&p);
    for_each_parent_selector(p, [&](SelectorState& s) { init_entrant_in_place(s, p.id); });
  }
  for (const auto* p : entrants) {
    const auto x = graph.index_of(p->stakeholder);
    if (graph.children(x).empty()) continue;
    selectors_.insert_or_assign(p->id, SelectorState(p->id, config_.policy_for(p->stakeholder),
                                                     candidates_for(x, t)));
  }
}

ServiceAdjustment Engine::adjustment_for(const AgentId& agent, std::int64_t t) const {
  ServiceAdjustment adj;
  for (const auto& p : config_.perturbations) {
    if (p.target != agent || t < p.active_from) continue;
    switch (p.knob) {
      case PerturbationKnob::LatencyMultiplier: adj.latency_multiplier *= p.magnitude; break;
      case PerturbationKnob::CostMultiplier: adj.cost_multiplier *= p.magnitude; break;
      case PerturbationKnob::QualityDelta: adj.quality_delta += p.magnitude; break;
    }
  }
  return adj;
}

std::string_view Engine::topic_key(const SelectorState& state, const Query& query) const {
  if (!state.params.per_topic || !query.topic) return {};
  return *query.topic;
}

std::vector<InteractionRecord> Engine::step(std::int64_t t) {
  if (t != last_step_ + 1 || t > config_.simulation.horizon) {
    throw Error(ErrorCode::DomainError, "step " + std::to_string(t) + " out of sequence");
  }
  if (t > 1) apply_schedule(t);
  last_step_ = t;

  RandomStream rng(config_.simulation.seed, StreamDomain::Step, static_cast<std::uint64_t>(t));

  // Fisher-Yates prefix: B draws pick B distinct users.
  const std::size_t n_users = users_.size();
  const auto batch = static_cast<std::size_t>(config_.simulation.batch_size);
  std::vector<std::size_t> order(n_users);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch; ++i) {
    std::swap(order[i], order[i + rng.below(n_users - i)]);
  }
  std::vector<std::size_t> sampled(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(batch));
  std::sort(sampled.begin(), sampled.end());

  std::vector<const Query*> queries;
  queries.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) queries.push_back(&next_query(rng));

  const auto& graph = config_.graph;
  std::vector<InteractionRecord> records;
  std::vector<PendingUpdate> pending;
  records.reserve(batch);

  for (std::size_t k = 0; k < batch; ++k) {
    const auto user_index = sampled[k];
    const auto& user = users_[user_index];
    const Query& query = *queries[k];

    InteractionRecord rec;
    rec.t = t;
    rec.user = user;
    rec.query = query.id;

    std::vector<TrajectoryStep> steps;
    AgentId current = user;
    std::size_t x = graph.user_index();
    for (;;) {
      auto candidates = candidates_for(x, t);
      if (candidates.empty()) break;
      AgentId chosen;
      if (candidates.size() == 1) {
        chosen = candidates.front();
      } else {
        const auto& selector = selectors_.at(current);
        chosen = select(selector, candidates, rng, topic_key(selector, query));
      }
      x = graph.stakeholder_of(chosen);
      steps.push_back({&config_.agents.at(chosen), graph.stakeholders()[x].kind,
                       adjustment_for(chosen, t)});
      rec.trajectory.push_back(chosen);
      current = std::move(chosen);
    }
    if (rec.trajectory.empty()) {
      throw Error(ErrorCode::EmptyCandidateSet, "no active agent reachable at step " + std::to_string(t));
    }

    const OracleBinding* fallback = config_.default_oracle ? &*config_.default_oracle : nullptr;
    rec.outcome = trajectory_utility(steps, config_.coefficients_for(user_index), fallback, query, rng);

    const AgentId* selector_id = &rec.user;
    for (const auto& chosen : rec.trajectory) {
      auto it = selectors_.find(*selector_id);
      if (it != selectors_.end()) {
        std::string topic(topic_key(it->second, query));
        if (config_.simulation.update_mode == UpdateMode::Immediate) {
          update_in_place(it->second, chosen, rec.outcome.mu, topic);
        } else {
          pending.push_back({*selector_id, chosen, rec.outcome.mu, std::move(topic)});
        }
      }
      selector_id = &chosen;
    }
    records.push_back(std::move(rec));
  }

  for (const auto& u : pending) update_in_place(selectors_.at(u.selector), u.chosen, u.mu, u.topic);
  return records;
}

SimulationLog run(const ScenarioConfig& config) {
  Engine engine(config);
  SimulationLog log;
  log.digest = config_digest(config);
  const auto horizon = config.simulation.horizon;
  log.records.reserve(static_cast<std::size_t>(horizon * config.simulation.batch_size));
  for (std::int64_t t = 1; t <= horizon; ++t) {
    auto step_records = engine.step(t);
    std::move(step_records.begin(), step_records.end(), std::back_inserter(log.records));
  }
  log.final_states = engine.selectors();
  return log;
}

SimulationLog replay(const SimulationLog& log, const ScenarioConfig& config) {
  const auto digest = config_digest(config);
  if (log.digest != digest) {
    throw Error(ErrorCode::DigestMismatch,
                "log digest " + log.digest + " does not match config digest " + digest);
  }
  auto fresh = run(config);
  const auto n = std::min(log.records.size(), fresh.records.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (record_to_json_line(log.records[i]) != record_to_json_line(fresh.records[i])) {
      throw DivergenceError(log.records[i].t, i,
                            "divergence at step " + std::to_string(log.records[i].t) +
                                ", record " + std::to_string(i));
    }
  }
  if (log.records.size() != fresh.records.size()) {
    const std::int64_t t = n < fresh.records.size() ? fresh.records[n].t : log.records[n].t;
    throw DivergenceError(t, n, "log has " + std::to_string(log.records.size()) +
                                    " records, replay produced " +
                                    std::to_string(fresh.records.size()));
  }
  return fresh;
}

}  // namespace mktsim
