#include "mktsim/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csv.hpp"

namespace mktsim {
namespace {

constexpr char kSep = '\x1f';

std::string key_of(const QueryId& q, const AgentId& a) { return q + kSep + a; }
std::string key_of(const QueryId& q, const AgentId& g, const AgentId& r) {
  return q + kSep + g + kSep + r;
}

void check_unit(double value, const std::string& what) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorCode::DomainError, what + " must lie in [0, 1]");
  }
}

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

}  // namespace

void ScoreTable::insert(const QueryId& query, const AgentId& agent, double score) {
  if (layout_ != Layout::ByAgent) throw Error(ErrorCode::ConfigInvalid, "table keyed by retriever");
  check_unit(score, "score");
  if (!scores_.emplace(key_of(query, agent), score).second) {
    throw Error(ErrorCode::DuplicateId, "duplicate score for (" + query + ", " + agent + ")");
  }
}

void ScoreTable::insert(const QueryId& query, const AgentId& generator, const AgentId& retriever,
                        double score) {
  if (layout_ != Layout::ByGeneratorRetriever) {
    throw Error(ErrorCode::ConfigInvalid, "table keyed by agent only");
  }
  check_unit(score, "score");
  if (!scores_.emplace(key_of(query, generator, retriever), score).second) {
    throw Error(ErrorCode::DuplicateId,
                "duplicate score for (" + query + ", " + generator + ", " + retriever + ")");
  }
}

std::optional<double> ScoreTable::find(const QueryId& query, const AgentId& agent) const {
  auto it = scores_.find(layout_ == Layout::ByAgent ? key_of(query, agent) : key_of(query, agent, ""));
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

std::optional<double> ScoreTable::find(const QueryId& query, const AgentId& generator,
                                       const AgentId& retriever) const {
  if (layout_ == Layout::ByAgent) return find(query, generator);
  auto it = scores_.find(key_of(query, generator, retriever));
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

ScoreTable parse_score_table(std::string_view csv_text) {
  auto lines = detail::split_lines(csv_text);
  if (lines.empty()) throw Error(ErrorCode::ParseError, "score table: missing header");
  auto header = detail::split_csv_line(lines[0]);
  for (auto& h : header) h = trim(h);
  // Tolerate a UTF-8 byte order mark.
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  ScoreTable::Layout layout;
  if (header == std::vector<std::string>{"query_id", "agent_id", "score"}) {
    layout = ScoreTable::Layout::ByAgent;
  } else if (header ==
             std::vector<std::string>{"query_id", "generator_id", "retriever_id", "score"}) {
    layout = ScoreTable::Layout::ByGeneratorRetriever;
  } else {
    throw Error(ErrorCode::ParseError, "score table line 1: unrecognized header");
  }

  ScoreTable table(layout);
  const std::size_t width = header.size();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "score table line " + std::to_string(i + 1);
    if (trim(std::string(lines[i])).empty()) continue;
    auto fields = detail::split_csv_line(lines[i]);
    if (fields.size() != width) throw Error(ErrorCode::ParseError, where + ": wrong field count");
    for (auto& f : fields) f = trim(f);
    const auto& text = fields.back();
    double score = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), score);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw Error(ErrorCode::ParseError, where + ": score '" + text + "' is not a number");
    }
    try {
      if (layout == ScoreTable::Layout::ByAgent) {
        table.insert(fields[0], fields[1], score);
      } else {
        table.insert(fields[0], fields[1], fields[2], score);
      }
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  return table;
}

ScoreTable load_score_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open score table '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_score_table(buffer.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void validate(const OracleBinding& binding) {
  std::visit(
      [](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, BernoulliOracle>) {
          check_unit(b.p, "bernoulli p");
          for (const auto& [topic, p] : b.p_by_topic) check_unit(p, "bernoulli p for topic " + topic);
          for (const auto& [r, p] : b.p_by_retriever) check_unit(p, "bernoulli p for retriever " + r);
        } else if constexpr (std::is_same_v<T, ConstantOracle>) {
          check_unit(b.q, "constant q");
        } else {
          if (!b.table) throw Error(ErrorCode::ConfigInvalid, "cached_table binding without a table");
        }
      },
      binding);
}

void validate(const UtilityCoefficients& c) {
  for (double v : {c.alpha, c.beta, c.gamma}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::DomainError, "utility coefficients must be finite and non-negative");
    }
  }
}

double score_quality(const OracleBinding& binding, const QualityKey& key, RandomStream& rng) {
  return std::visit(
      [&](const auto& b) -> double {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, CachedTableOracle>) {
          auto score = key.retriever ? b.table->find(key.query->id, key.agent, *key.retriever)
                                     : b.table->find(key.query->id, key.agent);
          if (!score) {
            std::string what = "(" + key.query->id + ", " + key.agent;
            if (key.retriever) what += ", " + *key.retriever;
            throw Error(ErrorCode::MissingScore, "cached table has no score for " + what + ")");
          }
          return *score;
        } else if constexpr (std::is_same_v<T, BernoulliOracle>) {
          double p = b.p;
          if (key.query->topic) {
            if (auto it = b.p_by_topic.find(*key.query->topic); it != b.p_by_topic.end()) p = it->second;
          }
          if (key.retriever) {
            if (auto it = b.p_by_retriever.find(*key.retriever); it != b.p_by_retriever.end()) {
              p = it->second;
            }
          }
          return rng.bernoulli(p) ? 1.0 : 0.0;
        } else {
          return b.q;
        }
      },
      binding);
}

UtilityOutcome evaluate(const UtilityCoefficients& coeffs, double quality, double cost,
                        double latency) {
  if (!(quality >= 0.0 && quality <= 1.0)) {
    throw Error(ErrorCode::DomainError, "quality must lie in [0, 1]");
  }
  if (!(cost >= 0.0) || !(latency >= 0.0)) {
    throw Error(ErrorCode::DomainError, "cost and latency must be non-negative");
  }
  return {quality, cost, latency,
          coeffs.alpha * quality - coeffs.beta * cost - coeffs.gamma * latency};
}

std::optional<std::size_t> quality_bearing_index(std::span<const TrajectoryStep> trajectory) {
  for (std::size_t i = 0; i < trajectory.size(); ++i)
    if (trajectory[i].kind == StakeholderKind::Generator) return i;
  for (std::size_t i = trajectory.size(); i-- > 0;)
    if (trajectory[i].kind != StakeholderKind::Router && trajectory[i].kind != StakeholderKind::User)
      return i;
  return std::nullopt;
}

UtilityOutcome trajectory_utility(std::span<const TrajectoryStep> trajectory,
                                  const UtilityCoefficients& coeffs, const OracleBinding* fallback,
                                  const Query& query, RandomStream& rng) {
  if (trajectory.empty()) throw Error(ErrorCode::DomainError, "empty trajectory");
  auto qi = quality_bearing_index(trajectory);
  if (!qi) throw Error(ErrorCode::MissingScore, "trajectory has no quality-bearing agent");
  const auto& bearer = *trajectory[*qi].profile;
  const OracleBinding* binding = bearer.quality_model ? &*bearer.quality_model : fallback;
  if (binding == nullptr) {
    throw Error(ErrorCode::MissingScore, "agent '" + bearer.id + "' has no oracle binding");
  }

  QualityKey key{&query, bearer.id, std::nullopt};
  if (trajectory[*qi].kind == StakeholderKind::Generator) {
    for (std::size_t i = *qi + 1; i < trajectory.size(); ++i) {
      if (trajectory[i].kind == StakeholderKind::Retriever) {
        key.retriever = trajectory[i].profile->id;
        break;
      }
    }
    // A composed table with no retriever on the path uses the empty retriever id.
    if (!key.retriever) {
      if (const auto* cached = std::get_if<CachedTableOracle>(binding);
          cached && cached->table->layout() == ScoreTable::Layout::ByGeneratorRetriever) {
        key.retriever = AgentId{};
      }
    }
  }
  double quality = score_quality(*binding, key, rng);

  double cost = 0.0;
  double latency = 0.0;
  double delta = 0.0;
  for (const auto& step : trajectory) {
    cost += step.profile->unit_cost * step.adjustment.cost_multiplier;
    latency += step.profile->latency * step.adjustment.latency_multiplier;
    delta += step.adjustment.quality_delta;
  }
  if (delta != 0.0) quality = std::clamp(quality + delta, 0.0, 1.0);
  return evaluate(coeffs, quality, cost, latency);
}

}  // namespace mktsim
