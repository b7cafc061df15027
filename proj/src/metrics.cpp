#include "mktsim/metrics.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "csv.hpp"
#include "mktsim/io.hpp"

namespace mktsim {

AgentValues::AgentValues(std::vector<AgentId> ids, Eigen::VectorXd v)
    : agents(std::move(ids)), values(std::move(v)) {
  if (static_cast<Eigen::Index>(agents.size()) != values.size()) {
    throw Error(ErrorCode::MismatchedAgents, "agent ids and values differ in length");
  }
}

AgentValues::AgentValues(std::initializer_list<std::pair<AgentId, double>> entries) {
  values.resize(static_cast<Eigen::Index>(entries.size()));
  Eigen::Index i = 0;
  for (const auto& [id, v] : entries) {
    agents.push_back(id);
    values(i++) = v;
  }
}

std::optional<std::size_t> AgentValues::find(const AgentId& agent) const {
  for (std::size_t i = 0; i < agents.size(); ++i)
    if (agents[i] == agent) return i;
  return std::nullopt;
}

double AgentValues::at(const AgentId& agent) const {
  if (auto i = find(agent)) return values(static_cast<Eigen::Index>(*i));
  throw Error(ErrorCode::UnknownAgent, "no value for agent '" + agent + "'");
}

Eigen::VectorXd AgentValues::aligned_to(std::span<const AgentId> order, double missing) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto j = find(order[i]);
    out(static_cast<Eigen::Index>(i)) = j ? values(static_cast<Eigen::Index>(*j)) : missing;
  }
  return out;
}

namespace {

void require_normalized(const AgentValues& shares) {
  if (!is_normalized(shares.values)) {
    throw Error(ErrorCode::NotNormalized, "shares must be non-negative and sum to 1");
  }
}

/// Target values in the order of `shares`; the agent sets must coincide.
Eigen::VectorXd matched_target(const AgentValues& shares, const AgentValues& target) {
  if (shares.size() != target.size()) {
    throw Error(ErrorCode::MismatchedAgents, "shares and target cover different agents");
  }
  Eigen::VectorXd out(shares.values.size());
  for (std::size_t i = 0; i < shares.agents.size(); ++i) {
    auto j = target.find(shares.agents[i]);
    if (!j) {
      throw Error(ErrorCode::MismatchedAgents, "target lacks agent '" + shares.agents[i] + "'");
    }
    out(static_cast<Eigen::Index>(i)) = target.values(static_cast<Eigen::Index>(*j));
  }
  return out;
}

}  // namespace

double hhi(const AgentValues& shares) {
  require_normalized(shares);
  return hhi(shares.values);
}

double exposure_disparity(const AgentValues& shares) {
  require_normalized(shares);
  return exposure_disparity(shares.values);
}

TargetExposure fair_share(const AgentValues& scores) {
  if ((scores.values.array() < 0).any() || !scores.values.allFinite()) {
    throw Error(ErrorCode::DomainError, "merit scores must be finite and non-negative");
  }
  const double total = scores.values.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::AllZeroScores, "at least one merit score must be positive");
  return {TargetExposureMode::MeritStatic, AgentValues(scores.agents, scores.values / total)};
}

TargetExposure uniform_exposure(std::span<const AgentId> agents) {
  const auto n = static_cast<Eigen::Index>(agents.size());
  if (n == 0) throw Error(ErrorCode::MismatchedAgents, "uniform exposure over no agents");
  return {TargetExposureMode::Uniform,
          AgentValues({agents.begin(), agents.end()}, Eigen::VectorXd::Constant(n, 1.0 / double(n)))};
}

double dominance_gap(const AgentValues& shares, const AgentValues& target) {
  const auto t = matched_target(shares, target);
  const auto top = top_index(shares.values, shares.agents);
  return shares.values(top) - t(top);
}

double max_share_gap(const AgentValues& shares, const AgentValues& target) {
  return (shares.values - matched_target(shares, target)).maxCoeff();
}

double expected_exposure(const AgentValues& shares, const AgentValues& target) {
  return expected_exposure(shares.values, matched_target(shares, target));
}

AgentValues fair_share_delta(const AgentValues& shares, const AgentValues& target) {
  return AgentValues(shares.agents, shares.values - matched_target(shares, target));
}

// ---------------------------------------------------------------------------

TrafficIndex::TrafficIndex(std::span<const InteractionRecord> records,
                           std::vector<AgentId> market_agents, std::int64_t horizon)
    : agents_(std::move(market_agents)), horizon_(horizon) {
  const auto n = static_cast<Eigen::Index>(agents_.size());
  const auto rows = static_cast<Eigen::Index>(horizon_ + 1);
  cumulative_counts_ = Eigen::MatrixXd::Zero(rows, n);
  cumulative_utility_ = Eigen::MatrixXd::Zero(rows, n);
  cumulative_total_ = Eigen::VectorXd::Zero(rows);

  std::unordered_map<AgentId, Eigen::Index> column;
  for (Eigen::Index i = 0; i < n; ++i) column.emplace(agents_[static_cast<std::size_t>(i)], i);

  for (const auto& r : records) {
    if (r.t < 1 || r.t > horizon_) {
      throw Error(ErrorCode::DomainError, "record step " + std::to_string(r.t) + " outside 1..T");
    }
    bool reached = false;
    for (const auto& a : r.trajectory) {
      auto it = column.find(a);
      if (it == column.end()) continue;
      cumulative_counts_(r.t, it->second) += 1.0;
      cumulative_utility_(r.t, it->second) += r.outcome.mu;
      reached = true;
    }
    if (reached) cumulative_total_(r.t) += 1.0;
  }
  for (Eigen::Index k = 1; k < rows; ++k) {
    cumulative_counts_.row(k) += cumulative_counts_.row(k - 1);
    cumulative_utility_.row(k) += cumulative_utility_.row(k - 1);
    cumulative_total_(k) += cumulative_total_(k - 1);
  }
}

Eigen::Index TrafficIndex::first_row(std::int64_t t, std::int64_t w) const {
  if (t < 1 || t > horizon_ || w < 1) {
    throw Error(ErrorCode::DomainError, "window (t=" + std::to_string(t) + ", w=" +
                                            std::to_string(w) + ") out of range");
  }
  return static_cast<Eigen::Index>(std::max<std::int64_t>(1, t - w + 1) - 1);
}

double TrafficIndex::window_total(std::int64_t t, std::int64_t w) const {
  return cumulative_total_(t) - cumulative_total_(first_row(t, w));
}

Eigen::VectorXd TrafficIndex::window_counts(std::int64_t t, std::int64_t w) const {
  return (cumulative_counts_.row(t) - cumulative_counts_.row(first_row(t, w))).transpose();
}

Eigen::VectorXd TrafficIndex::window_utility(std::int64_t t, std::int64_t w) const {
  return (cumulative_utility_.row(t) - cumulative_utility_.row(first_row(t, w))).transpose();
}

AgentValues TrafficIndex::market_share(std::int64_t t, std::int64_t w) const {
  const double total = window_total(t, w);
  if (total == 0.0) {
    throw Error(ErrorCode::EmptyWindow, "no interactions in window ending at step " + std::to_string(t));
  }
  return AgentValues(agents_, window_counts(t, w) / total);
}

AgentValues market_share(std::span<const InteractionRecord> records,
                         std::span<const AgentId> market_agents, std::int64_t t, std::int64_t w) {
  std::int64_t horizon = t;
  for (const auto& r : records) horizon = std::max(horizon, r.t);
  TrafficIndex index(records, {market_agents.begin(), market_agents.end()}, horizon);
  return index.market_share(t, w);
}

namespace {

bool selects(const InteractionRecord& r, const AgentId& agent) {
  return std::find(r.trajectory.begin(), r.trajectory.end(), agent) != r.trajectory.end();
}

}  // namespace

std::optional<double> retention_user(std::span<const InteractionRecord> records, const AgentId& user,
                                     const AgentId& agent, std::int64_t m) {
  if (m < 1) throw Error(ErrorCode::DomainError, "retention window m must be >= 1");
  std::vector<const InteractionRecord*> history;
  for (const auto& r : records)
    if (r.user == user) history.push_back(&r);
  auto first = std::find_if(history.begin(), history.end(),
                            [&](const InteractionRecord* r) { return selects(*r, agent); });
  if (first == history.end()) return std::nullopt;
  const auto remaining = static_cast<std::int64_t>(history.end() - first - 1);
  const auto k = std::min(m, remaining);
  if (k == 0) return std::nullopt;
  std::int64_t kept = 0;
  for (std::int64_t i = 1; i <= k; ++i) kept += selects(**(first + i), agent) ? 1 : 0;
  return static_cast<double>(kept) / static_cast<double>(k);
}

AgentRetention retention_agent(std::span<const InteractionRecord> records, const AgentId& agent,
                               std::int64_t m) {
  std::vector<AgentId> adopters;
  for (const auto& r : records) {
    if (selects(r, agent) && std::find(adopters.begin(), adopters.end(), r.user) == adopters.end()) {
      adopters.push_back(r.user);
    }
  }
  AgentRetention out;
  out.adopters = adopters.size();
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& u : adopters) {
    if (auto v = retention_user(records, u, agent, m)) {
      sum += *v;
      ++defined;
    }
  }
  if (defined > 0) out.value = sum / static_cast<double>(defined);
  return out;
}

// ---------------------------------------------------------------------------

TargetExposure target_exposure(const ScenarioConfig& config, const TrafficIndex& traffic,
                               std::span<const AgentId> active, std::int64_t t) {
  const auto& spec = config.metrics.target_exposure;
  std::vector<AgentId> ids(active.begin(), active.end());
  switch (spec.mode) {
    case TargetExposureMode::Uniform:
      return uniform_exposure(active);
    case TargetExposureMode::MeritStatic: {
      Eigen::VectorXd scores(static_cast<Eigen::Index>(ids.size()));
      for (std::size_t i = 0; i < ids.size(); ++i) {
        scores(static_cast<Eigen::Index>(i)) = spec.scores.at(ids[i]);
      }
      return fair_share(AgentValues(ids, scores));
    }
    case TargetExposureMode::MeritWindowed: {
      const AgentValues accrued(traffic.agents_vector(), traffic.window_utility(t, config.metrics.window));
      Eigen::VectorXd merit = accrued.aligned_to(ids).cwiseMax(0.0);
      if (!(merit.sum() > 0.0)) {
        auto u = uniform_exposure(active);
        u.mode = TargetExposureMode::MeritWindowed;
        return u;
      }
      auto fs = fair_share(AgentValues(ids, merit));
      fs.mode = TargetExposureMode::MeritWindowed;
      return fs;
    }
  }
  return uniform_exposure(active);
}

namespace {

std::vector<AgentId> active_market(const ScenarioConfig& config, std::int64_t t) {
  return active_agents(config.graph, config.agents, config.metrics.market, t);
}

}  // namespace

MetricsReport compute_report(const SimulationLog& log, const ScenarioConfig& config) {
  MetricsReport report;
  report.market = config.metrics.market;
  report.window = config.metrics.window;
  const auto horizon = config.simulation.horizon;
  const auto w = config.metrics.window;
  const auto& market_agents = config.graph.stakeholder(config.metrics.market).agents;
  TrafficIndex traffic(log.records, market_agents, horizon);

  for (std::int64_t t = 1; t <= horizon; ++t) {
    StepMetrics row;
    row.t = t;
    const auto active = active_market(config, t);
    const double total = traffic.window_total(t, w);
    if (total == 0.0) {
      row.has_traffic = false;
      report.series.push_back(std::move(row));
      continue;
    }
    const auto counts = traffic.window_counts(t, w);
    std::vector<AgentId> ids;
    std::vector<double> values;
    for (std::size_t i = 0; i < market_agents.size(); ++i) {
      const auto c = counts(static_cast<Eigen::Index>(i));
      const bool is_active = std::find(active.begin(), active.end(), market_agents[i]) != active.end();
      if (is_active || c > 0.0) {
        ids.push_back(market_agents[i]);
        values.push_back(c / total);
      }
    }
    row.shares = AgentValues(ids, Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                                    static_cast<Eigen::Index>(values.size())));
    const auto target = target_exposure(config, traffic, active, t);
    row.epsilon_star = AgentValues(ids, target.epsilon_star.aligned_to(ids));
    row.hhi = hhi(row.shares.values);
    row.eed = exposure_disparity(row.shares.values);
    row.dominance_gap = dominance_gap(row.shares, row.epsilon_star);
    row.max_share_gap = max_share_gap(row.shares, row.epsilon_star);
    row.ee = expected_exposure(row.shares, row.epsilon_star);
    report.series.push_back(std::move(row));
  }

  const auto m = config.metrics.retention_m;
  for (const auto& a : market_agents) {
    report.retention.push_back({a, m, retention_agent(log.records, a, m)});
  }

  // Whole-run fair share table.
  {
    Eigen::VectorXd scores(static_cast<Eigen::Index>(market_agents.size()));
    const auto& spec = config.metrics.target_exposure;
    const auto utility = traffic.window_utility(horizon, horizon);
    for (std::size_t i = 0; i < market_agents.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      switch (spec.mode) {
        case TargetExposureMode::Uniform: scores(k) = 1.0; break;
        case TargetExposureMode::MeritStatic: scores(k) = spec.scores.at(market_agents[i]); break;
        case TargetExposureMode::MeritWindowed: scores(k) = std::max(0.0, utility(k)); break;
      }
    }
    if (!(scores.sum() > 0.0)) scores.setOnes();
    const auto target = fair_share(AgentValues(market_agents, scores)).epsilon_star;
    const double total = traffic.window_total(horizon, horizon);
    Eigen::VectorXd shares = total > 0.0 ? Eigen::VectorXd(traffic.window_counts(horizon, horizon) / total)
                                         : Eigen::VectorXd::Zero(scores.size());
    for (std::size_t i = 0; i < market_agents.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      report.fair_share.push_back({market_agents[i], scores(k), target.values(k), shares(k) - target.values(k)});
    }
  }

  // Periods of constant membership.
  std::int64_t from = 1;
  auto members = active_market(config, 1);
  for (std::int64_t t = 2; t <= horizon + 1; ++t) {
    std::vector<AgentId> next;
    if (t <= horizon) next = active_market(config, t);
    if (t <= horizon && next == members) continue;
    const auto to = t - 1;
    Period p;
    p.from = from;
    p.to = to;
    const auto span_w = to - from + 1;
    if (traffic.window_total(to, span_w) > 0.0 && !members.empty()) {
      const auto full = traffic.market_share(to, span_w);
      std::vector<AgentId> ids;
      for (const auto& a : market_agents) {
        const bool member = std::find(members.begin(), members.end(), a) != members.end();
        if (member || full.at(a) > 0.0) ids.push_back(a);
      }
      p.shares = AgentValues(ids, full.aligned_to(ids));
      TargetExposure target = target_exposure(config, traffic, members, to);
      if (config.metrics.target_exposure.mode == TargetExposureMode::MeritWindowed) {
        // Merit accrued over the whole period rather than the trailing window.
        const AgentValues accrued(traffic.agents_vector(), traffic.window_utility(to, span_w));
        Eigen::VectorXd merit = accrued.aligned_to(members).cwiseMax(0.0);
        if (merit.sum() > 0.0) target = fair_share(AgentValues(members, merit));
      }
      p.epsilon_star = AgentValues(ids, target.epsilon_star.aligned_to(ids));
      p.delta_fs = fair_share_delta(p.shares, p.epsilon_star);
      p.hhi = hhi(p.shares.values);
    }
    report.periods.push_back(std::move(p));
    from = t;
    members = std::move(next);
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string market_share_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "t,agent,share\n";
  for (const auto& row : report.series) {
    for (std::size_t i = 0; i < row.shares.size(); ++i) {
      out << row.t << ',' << detail::csv_field(row.shares.agents[i]) << ','
          << format_double(row.shares.values(static_cast<Eigen::Index>(i))) << '\n';
    }
  }
  return out.str();
}

std::string concentration_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "t,hhi,eed,dominance_gap,ee\n";
  for (const auto& row : report.series) {
    out << row.t << ',';
    if (row.has_traffic) {
      out << format_double(row.hhi) << ',' << format_double(row.eed) << ','
          << format_double(row.dominance_gap) << ',' << format_double(row.ee);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  return out.str();
}

std::string retention_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "agent,m,cr,n_adopters\n";
  for (const auto& row : report.retention) {
    out << detail::csv_field(row.agent) << ',' << row.m << ','
        << (row.retention.value ? format_double(*row.retention.value) : std::string{}) << ','
        << row.retention.adopters << '\n';
  }
  return out.str();
}

std::string fair_share_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "agent,score,epsilon_star,delta_fs\n";
  for (const auto& row : report.fair_share) {
    out << detail::csv_field(row.agent) << ',' << format_double(row.score) << ','
        << format_double(row.epsilon_star) << ',' << format_double(row.delta_fs) << '\n';
  }
  return out.str();
}

namespace {

nlohmann::ordered_json values_object(const AgentValues& v) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < v.size(); ++i) j[v.agents[i]] = v.values(static_cast<Eigen::Index>(i));
  return j;
}

}  // namespace

std::string summary_json(const MetricsReport& report, const std::string& digest) {
  nlohmann::ordered_json j;
  j["digest"] = digest;
  j["market"] = report.market;
  j["w"] = report.window;
  j["T"] = report.series.size();
  if (!report.series.empty() && report.series.back().has_traffic) {
    const auto& last = report.series.back();
    const auto top = top_index(last.shares.values, last.shares.agents);
    j["final"] = {{"t", last.t},
                  {"hhi", last.hhi},
                  {"eed", last.eed},
                  {"dominance_gap", last.dominance_gap},
                  {"ee", last.ee},
                  {"top_agent", last.shares.agents[static_cast<std::size_t>(top)]},
                  {"shares", values_object(last.shares)}};
  } else {
    j["final"] = nullptr;
  }
  double hhi_sum = 0.0;
  std::size_t with_traffic = 0;
  nlohmann::ordered_json max_gap = nlohmann::ordered_json::array();
  for (const auto& row : report.series) {
    if (row.has_traffic) {
      hhi_sum += row.hhi;
      ++with_traffic;
      max_gap.push_back(row.max_share_gap);
    } else {
      max_gap.push_back(nullptr);
    }
  }
  j["mean_hhi"] = with_traffic ? nlohmann::ordered_json(hhi_sum / double(with_traffic)) : nlohmann::ordered_json(nullptr);
  j["dominance_gap_max_over_agents"] = max_gap;
  auto periods = nlohmann::ordered_json::array();
  for (const auto& p : report.periods) {
    nlohmann::ordered_json pj;
    pj["from"] = p.from;
    pj["to"] = p.to;
    pj["hhi"] = p.hhi;
    pj["shares"] = values_object(p.shares);
    pj["epsilon_star"] = values_object(p.epsilon_star);
    pj["delta_fs"] = values_object(p.delta_fs);
    periods.push_back(std::move(pj));
  }
  j["periods"] = periods;
  auto retention = nlohmann::ordered_json::object();
  for (const auto& r : report.retention) {
    retention[r.agent] = r.retention.value ? nlohmann::ordered_json(*r.retention.value) : nlohmann::ordered_json(nullptr);
  }
  j["retention"] = retention;
  return j.dump(2) + "\n";
}

void write_report(const MetricsReport& report, const std::string& digest, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  write_text_file((base / "market_share.csv").string(), market_share_csv(report));
  write_text_file((base / "concentration.csv").string(), concentration_csv(report));
  write_text_file((base / "retention.csv").string(), retention_csv(report));
  write_text_file((base / "fair_share.csv").string(), fair_share_csv(report));
  write_text_file((base / "summary.json").string(), summary_json(report, digest));
}

}  // namespace mktsim
