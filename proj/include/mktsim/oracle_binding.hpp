#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>

#include "mktsim/types.hpp"

namespace mktsim {

/// Precomputed per-question quality scores in [0, 1].
///
/// Two layouts are accepted: keyed by (query, agent), or by (query, generator,
/// retriever) for retrieval-augmented compositions. In the second layout an empty
/// retriever id stands for "generator answered without retrieval".
class ScoreTable {
 public:
  enum class Layout { ByAgent, ByGeneratorRetriever };

  explicit ScoreTable(Layout layout) : layout_(layout) {}

  Layout layout() const noexcept { return layout_; }
  std::size_t size() const noexcept { return scores_.size(); }

  /// Throws DuplicateId on a repeated key and DomainError on a score outside [0, 1].
  void insert(const QueryId& query, const AgentId& agent, double score);
  void insert(const QueryId& query, const AgentId& generator, const AgentId& retriever,
              double score);

  std::optional<double> find(const QueryId& query, const AgentId& agent) const;
  std::optional<double> find(const QueryId& query, const AgentId& generator,
                             const AgentId& retriever) const;

 private:
  Layout layout_;
  std::unordered_map<std::string, double> scores_;
};

/// Parses `query_id,agent_id,score` or `query_id,generator_id,retriever_id,score`.
/// Throws ParseError naming the offending line.
ScoreTable parse_score_table(std::string_view csv_text);
ScoreTable load_score_table(const std::string& path);

struct CachedTableOracle {
  std::shared_ptr<const ScoreTable> table;
  std::string source;          // absolute path once resolved
  std::string content_sha256;  // hex digest of the file contents
};

struct BernoulliOracle {
  double p = 0.0;
  std::map<std::string, double> p_by_topic;
  std::map<AgentId, double> p_by_retriever;
};

struct ConstantOracle {
  double q = 0.0;
};

using OracleBinding = std::variant<CachedTableOracle, BernoulliOracle, ConstantOracle>;

/// Throws DomainError when a probability or constant lies outside [0, 1].
void validate(const OracleBinding& binding);

}  // namespace mktsim
