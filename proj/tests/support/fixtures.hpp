#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mktsim/config.hpp"
#include "mktsim/engine.hpp"

namespace mktsim::testing {

inline std::filesystem::path source_dir() { return MKTSIM_SOURCE_DIR; }
inline std::filesystem::path scenario_path(const std::string& name) {
  return source_dir() / "scenarios" / name;
}

/// U -> G marketplace with Bernoulli generators, inline pool of `queries` items.
inline Json user_generator_doc(const std::vector<std::pair<std::string, double>>& generators,
                               int users, int batch, int horizon, int queries = 50,
                               const std::string& sampling = "with_replacement") {
  Json agents = Json::array();
  for (const auto& [id, p] : generators) {
    agents.push_back({{"id", id}, {"stakeholder", "G"},
                      {"quality_model", {{"kind", "bernoulli"}, {"p", p}}}});
  }
  Json items = Json::array();
  for (int i = 1; i <= queries; ++i) items.push_back({{"id", "q" + std::to_string(i)}});
  return Json{
      {"marketplace",
       {{"stakeholders", {{{"id", "U"}, {"kind", "user"}}, {{"id", "G"}, {"kind", "generator"}}}},
        {"edges", {{{"from", "U"}, {"to", "G"}}}}}},
      {"agents", agents},
      {"users", {{"count", users}}},
      {"pool", {{"items", items}}},
      {"simulation", {{"T", horizon}, {"B", batch}, {"seed", 0}, {"sampling", sampling}}},
      {"metrics", {{"w", std::min(horizon, 10)}}},
  };
}

/// U -> G -> {F, R}, F -> R: the four-role topology with two agents per role.
inline Json four_role_doc(int horizon = 20) {
  Json agents = Json::array();
  for (const char* g : {"g1", "g2"}) {
    agents.push_back({{"id", g}, {"stakeholder", "G"}, {"unit_cost", 0.1}, {"latency", 1.0}});
  }
  agents.push_back({{"id", "f1"}, {"stakeholder", "F"}, {"unit_cost", 0.01}, {"latency", 0.1}});
  for (const char* r : {"r1", "r2"}) {
    agents.push_back({{"id", r}, {"stakeholder", "R"}, {"unit_cost", 0.05}, {"latency", 0.5}});
  }
  Json items = Json::array();
  for (int i = 1; i <= 30; ++i) {
    items.push_back({{"id", "q" + std::to_string(i)}, {"topic", i % 2 ? "odd" : "even"}});
  }
  return Json{
      {"marketplace",
       {{"stakeholders",
         {{{"id", "U"}, {"kind", "user"}},
          {{"id", "G"}, {"kind", "generator"}},
          {{"id", "F"}, {"kind", "router"}},
          {{"id", "R"}, {"kind", "retriever"}}}},
        {"edges",
         {{{"from", "U"}, {"to", "G"}},
          {{"from", "G"}, {"to", "F"}},
          {{"from", "G"}, {"to", "R"}},
          {{"from", "F"}, {"to", "R"}}}}}},
      {"agents", agents},
      {"users", {{"count", 4}, {"coefficients", {{"alpha", 1.0}, {"beta", 0.1}, {"gamma", 0.05}}}}},
      {"pool", {{"items", items}}},
      {"oracle",
       {{"binding",
         {{"kind", "bernoulli"}, {"p", 0.5}, {"p_by_retriever", {{"r1", 0.8}, {"r2", 0.3}}}}}}},
      {"simulation", {{"T", horizon}, {"B", 3}, {"seed", 0}, {"sampling", "with_replacement"}}},
  };
}

inline ScenarioConfig build(const Json& doc) { return config_from_document(doc, source_dir()); }

/// Random market log: each record picks one market agent (or occasionally none).
inline std::vector<InteractionRecord> random_log(std::mt19937_64& gen, int steps, int users,
                                                 const std::vector<AgentId>& agents,
                                                 int max_batch, bool allow_off_market = false) {
  std::vector<InteractionRecord> log;
  std::uniform_int_distribution<int> batch_dist(0, max_batch);
  std::uniform_int_distribution<int> user_dist(1, users);
  std::uniform_int_distribution<std::size_t> agent_dist(0, agents.size() - 1);
  std::uniform_real_distribution<double> mu_dist(0.0, 1.0);
  std::bernoulli_distribution off_market(0.1);
  for (int t = 1; t <= steps; ++t) {
    const int b = batch_dist(gen);
    for (int k = 0; k < b; ++k) {
      InteractionRecord r;
      r.t = t;
      r.user = "u" + std::to_string(user_dist(gen));
      r.query = "q" + std::to_string(k);
      if (!(allow_off_market && off_market(gen))) r.trajectory = {agents[agent_dist(gen)]};
      else r.trajectory = {"elsewhere"};
      r.outcome.mu = r.outcome.quality = mu_dist(gen);
      log.push_back(r);
    }
  }
  return log;
}

}  // namespace mktsim::testing
