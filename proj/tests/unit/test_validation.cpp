#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mktsim/validation.hpp"
#include "support/fixtures.hpp"

using namespace mktsim;
using namespace mktsim::testing;

namespace {

std::vector<std::uint64_t> seeds(std::uint64_t n) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), 0);
  return s;
}

Json latency_market() {
  auto doc = user_generator_doc({{"a", 0.6}, {"b", 0.5}, {"c", 0.4}}, 6, 3, 60);
  doc["agents"][0]["latency"] = 1.0;
  doc["agents"][1]["latency"] = 1.0;
  doc["agents"][2]["latency"] = 1.0;
  doc["users"]["coefficients"] = {{"alpha", 1.0}, {"gamma", 0.05}};
  return doc;
}

}  // namespace

TEST(Perturb, NullPerturbationIsExactlyZero) {
  const auto config = load_config(scenario_path("qwen_late_entry.json"));
  const auto result = perturb_and_compare(config, {"kimi", PerturbationKnob::QualityDelta, 0.0, 1},
                                          seeds(4), 2);
  ASSERT_EQ(result.deltas.size(), 4u);
  for (const auto& d : result.deltas) {
    EXPECT_EQ(d.mean_share, 0.0);
    EXPECT_EQ(d.final_hhi, 0.0);
    ASSERT_TRUE(d.retention.has_value());
    EXPECT_EQ(*d.retention, 0.0);
  }
  const auto unit = perturb_and_compare(config, {"kimi", PerturbationKnob::LatencyMultiplier, 1.0, 1},
                                        seeds(2), 1);
  for (const auto& d : unit.deltas) EXPECT_EQ(d.mean_share, 0.0);
}

TEST(Perturb, SlowerAgentLosesShare) {
  const auto config = build(latency_market());
  const auto result = perturb_and_compare(config, {"b", PerturbationKnob::LatencyMultiplier, 10.0, 1},
                                          seeds(20));
  const auto losing = std::count_if(result.deltas.begin(), result.deltas.end(),
                                    [](const PairedDelta& d) { return d.mean_share <= 0.0; });
  EXPECT_GT(losing, 10);
}

TEST(Perturb, DegradingTheLeaderMovesConcentration) {
  const auto config = load_config(scenario_path("qwen_late_entry.json"));
  const auto result = perturb_and_compare(config, {"qwen3", PerturbationKnob::QualityDelta, -0.5, 1},
                                          seeds(20));
  const auto lower = std::count_if(result.deltas.begin(), result.deltas.end(),
                                   [](const PairedDelta& d) { return d.final_hhi < 0.0; });
  // The entrant's dominance is what concentrates the market; removing its edge spreads it.
  EXPECT_GT(lower, 10);
  for (const auto& d : result.deltas) EXPECT_LT(d.mean_share, 0.0);
}

TEST(Perturb, ArgumentChecks) {
  const auto config = build(latency_market());
  EXPECT_THROW(perturb_and_compare(config, {"b", PerturbationKnob::QualityDelta, 0.0, 1}, seeds(1)), Error);
  std::vector<std::uint64_t> dup{3, 3};
  EXPECT_THROW(perturb_and_compare(config, {"b", PerturbationKnob::QualityDelta, 0.0, 1}, dup), Error);
  EXPECT_THROW(validate(Perturbation{"b", PerturbationKnob::CostMultiplier, 0.0, 1}), Error);
  EXPECT_THROW(perturb_and_compare(config, {"nobody", PerturbationKnob::QualityDelta, 0.0, 1}, seeds(2)),
               Error);
}

TEST(Bootstrap, IdenticalSamples) {
  std::vector<double> a{0.2, 0.4, 0.9, 0.1, 0.5, 0.3, 0.8};
  RandomStream rng(1);
  const auto paired = bootstrap_asl(a, a, 2000, rng);
  EXPECT_EQ(paired.observed, 0.0);
  EXPECT_NEAR(paired.asl, 0.5, 0.05);
  const auto unpaired = bootstrap_asl(a, a, 4000, rng, false);
  EXPECT_NEAR(unpaired.asl, 0.5, 0.05);
}

TEST(Bootstrap, SeparatedSamples) {
  std::vector<double> ones(4, 1.0), zeros(4, 0.0);
  RandomStream rng(1);
  const auto r = bootstrap_asl(ones, zeros, 1000, rng);
  EXPECT_EQ(r.asl, 0.0);
  EXPECT_EQ(r.observed, 1.0);
  EXPECT_EQ(r.ci_low, 1.0);
  EXPECT_EQ(r.ci_high, 1.0);
}

TEST(Bootstrap, DeterministicGivenSeed) {
  std::vector<double> a{0.1, 0.7, 0.3, 0.5}, b{0.2, 0.2, 0.6, 0.1};
  RandomStream r1(42), r2(42);
  const auto x = bootstrap_asl(a, b, 1500, r1, false);
  const auto y = bootstrap_asl(a, b, 1500, r2, false);
  EXPECT_EQ(x.asl, y.asl);
  EXPECT_EQ(x.ci_low, y.ci_low);
  EXPECT_EQ(x.ci_high, y.ci_high);
}

TEST(Bootstrap, CoverageOnGaussianSamples) {
  RandomStream data(7), resampler(8);
  int covered = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a(50), b(50);
    for (auto& x : a) x = 0.6 + 0.1 * data.normal();
    for (auto& x : b) x = 0.5 + 0.1 * data.normal();
    const auto r = bootstrap_asl(a, b, 1000, resampler, false);
    covered += r.ci_low <= 0.1 && 0.1 <= r.ci_high;
  }
  EXPECT_GE(covered, 90);
}

TEST(Bootstrap, ArgumentChecks) {
  std::vector<double> a{1.0, 2.0}, b{1.0};
  RandomStream rng(1);
  EXPECT_THROW(bootstrap_asl(a, a, 999, rng), Error);
  EXPECT_THROW(bootstrap_asl(a, b, 1000, rng), Error);
  EXPECT_NO_THROW(bootstrap_asl(a, b, 1000, rng, false));
  EXPECT_THROW(bootstrap_asl({}, b, 1000, rng, false), Error);
}

TEST(RankCorrelation, DocumentedCases) {
  std::vector<AgentId> a{"qwen3", "kimi", "llama", "deepseek", "grok", "gemini", "gptoss"};
  EXPECT_DOUBLE_EQ(rank_correlation(a, a), 1.0);
  std::vector<AgentId> rev(a.rbegin(), a.rend());
  EXPECT_DOUBLE_EQ(rank_correlation(a, rev), -1.0);
  auto swapped = a;
  std::swap(swapped[2], swapped[3]);
  EXPECT_DOUBLE_EQ(rank_correlation(a, swapped), 19.0 / 21.0);
}

TEST(RankCorrelation, SymmetricAndBruteForce) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 9);
    std::vector<AgentId> a;
    for (int i = 0; i < n; ++i) a.push_back("a" + std::to_string(i));
    auto b = a;
    std::shuffle(b.begin(), b.end(), gen);
    int concordant = 0, discordant = 0;
    auto pos = [](const std::vector<AgentId>& v, const AgentId& x) {
      return std::find(v.begin(), v.end(), x) - v.begin();
    };
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const bool same = (pos(a, a[i]) < pos(a, a[j])) == (pos(b, a[i]) < pos(b, a[j]));
        (same ? concordant : discordant)++;
      }
    }
    const double expected = double(concordant - discordant) / (n * (n - 1) / 2);
    EXPECT_NEAR(rank_correlation(a, b), expected, 1e-15);
    EXPECT_EQ(rank_correlation(a, b), rank_correlation(b, a));
  }
}

TEST(RankCorrelation, SetMismatch) {
  std::vector<AgentId> a{"x", "y"}, b{"x", "z"}, c{"x"};
  for (const auto* other : {&b, &c}) {
    try {
      rank_correlation(a, *other);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::SetMismatch);
    }
  }
}

TEST(ShareRanking, OrdersByCumulativeShare) {
  const auto config = load_config(scenario_path("qwen_late_entry.json"));
  const auto log = run(config);
  const auto ranking = share_ranking(log, config);
  ASSERT_EQ(ranking.size(), 7u);
  std::map<AgentId, int> counts;
  for (const auto& r : log.records) ++counts[r.trajectory.front()];
  for (std::size_t i = 0; i + 1 < ranking.size(); ++i) {
    const int hi = counts[ranking[i]], lo = counts[ranking[i + 1]];
    EXPECT_TRUE(hi > lo || (hi == lo && ranking[i] < ranking[i + 1]));
  }
}
