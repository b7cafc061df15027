#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mktsim/io.hpp"
#include "support/fixtures.hpp"

using namespace mktsim;
using namespace mktsim::testing;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::function<void()>& f, ErrorCode expected) {
  try {
    f();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), expected) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return {};
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("mktsim_config_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, BundledQwenScenario) {
  const auto config = load_config(scenario_path("qwen_late_entry.json"));
  EXPECT_EQ(config.agents.profiles().size(), 7u);
  EXPECT_EQ(config.users.count, 10u);
  EXPECT_EQ(config.simulation.horizon, 200);
  EXPECT_EQ(config.simulation.batch_size, 5);
  EXPECT_EQ(config.metrics.window, 10);
  EXPECT_EQ(config.pool.size(), 500u);
  EXPECT_EQ(config.agents.at("qwen3").entry_step, 101);
  EXPECT_EQ(config.metrics.target_exposure.mode, TargetExposureMode::MeritStatic);
  EXPECT_DOUBLE_EQ(config.metrics.target_exposure.scores.at("qwen3"), 60.24);
  const auto& binding = std::get<BernoulliOracle>(*config.agents.at("qwen3").quality_model);
  EXPECT_DOUBLE_EQ(binding.p, 0.6024);
}

TEST(Config, BundledDeepSeekScenario) {
  const auto config = load_config(scenario_path("deepseek_late_entry.json"));
  EXPECT_EQ(config.agents.at("deepseek").entry_step, 101);
  EXPECT_EQ(config.agents.at("qwen3").entry_step, kFromStart);
}

TEST(Config, UnknownKeysRejected) {
  auto doc = user_generator_doc({{"a", 0.5}}, 1, 1, 3);
  doc["simulation"]["horizon"] = 3;
  EXPECT_NE(error_of([&] { build(doc); }, ErrorCode::ConfigInvalid).find("horizon"), std::string::npos);
  doc = user_generator_doc({{"a", 0.5}}, 1, 1, 3);
  doc["extras"] = 1;
  EXPECT_NE(error_of([&] { build(doc); }, ErrorCode::ConfigInvalid).find("extras"), std::string::npos);
}

TEST(Config, OverridesApplyByDottedPath) {
  auto doc = user_generator_doc({{"a", 0.5}, {"b", 0.5}}, 2, 1, 3);
  apply_override(doc, "simulation.seed=7");
  apply_override(doc, "agents.1.latency=2.5");
  apply_override(doc, "simulation.sampling=cycled");
  EXPECT_EQ(doc["simulation"]["seed"], 7);
  EXPECT_EQ(doc["agents"][1]["latency"], 2.5);
  EXPECT_EQ(doc["simulation"]["sampling"], "cycled");
  EXPECT_THROW(apply_override(doc, "no_equals_sign"), Error);
}

TEST(Config, MissingPoolFileNamesPath) {
  auto doc = user_generator_doc({{"a", 0.5}}, 1, 1, 3);
  doc["pool"] = {{"file", "does/not/exist.csv"}};
  const auto msg = error_of([&] { build(doc); }, ErrorCode::ConfigInvalid);
  EXPECT_NE(msg.find("does/not/exist.csv"), std::string::npos) << msg;
}

TEST(Config, ResolvedDocumentRoundTrips) {
  for (const char* name : {"qwen_late_entry.json", "deepseek_late_entry.json"}) {
    const auto config = load_config(scenario_path(name));
    const auto resolved = resolved_document(config);
    const auto again = config_from_document(resolved, "/");
    EXPECT_EQ(resolved_document(again), resolved);
    EXPECT_EQ(config_digest(again), config_digest(config));
  }
  const auto four = build(four_role_doc());
  EXPECT_EQ(resolved_document(config_from_document(resolved_document(four), "/")),
            resolved_document(four));
}

TEST(Config, DigestTracksEveryField) {
  const auto base = build(four_role_doc());
  auto doc = four_role_doc();
  doc["users"]["coefficients"]["gamma"] = 0.06;
  EXPECT_NE(config_digest(build(doc)), config_digest(base));
  EXPECT_EQ(config_digest(build(four_role_doc())), config_digest(base));
}

TEST(Config, CachedTableWithHashCheck) {
  const auto dir = temp_dir("table");
  const std::string csv = "query_id,agent_id,score\nq1,a,1\nq2,a,0\n";
  write_text_file((dir / "scores.csv").string(), csv);
  Json doc = user_generator_doc({{"a", 0.5}}, 1, 1, 2, 2);
  doc["agents"][0].erase("quality_model");
  doc["oracle"] = {{"binding", {{"kind", "cached_table"}, {"table", "scores.csv"}}}};
  const auto config = config_from_document(doc, dir);
  const auto& b = std::get<CachedTableOracle>(*config.default_oracle);
  EXPECT_EQ(b.content_sha256, sha256_hex(csv));
  EXPECT_TRUE(fs::path(b.source).is_absolute());
  EXPECT_NO_THROW(run(config));

  doc["oracle"]["binding"]["sha256"] = std::string(64, '0');
  error_of([&] { config_from_document(doc, dir); }, ErrorCode::ConfigInvalid);
}

TEST(Config, ScheduleConflictsRejected) {
  auto doc = user_generator_doc({{"a", 0.5}, {"b", 0.5}}, 1, 1, 3);
  doc["agents"][1]["entry_step"] = 2;
  doc["schedule"] = Json::array({{{"agent", "b"}, {"entry_step", 3}}});
  error_of([&] { build(doc); }, ErrorCode::ConfigInvalid);
  doc["schedule"] = Json::array({{{"agent", "b"}, {"entry_step", 2}}});
  EXPECT_NO_THROW(build(doc));
}

TEST(Config, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, TruncatedLogNamesLine) {
  const auto log = run(build(user_generator_doc({{"a", 0.5}}, 2, 2, 3)));
  auto text = log_to_jsonl(log);
  text.resize(text.size() - 20);  // cut into the last record
  std::istringstream in(text);
  const auto msg = error_of([&] { read_log_jsonl(in); }, ErrorCode::ParseError);
  EXPECT_NE(msg.find("line 7"), std::string::npos) << msg;
}

TEST(Io, MissingRecordsDetected) {
  const auto log = run(build(user_generator_doc({{"a", 0.5}}, 2, 2, 3)));
  auto text = log_to_jsonl(log);
  text.erase(text.rfind('\n', text.size() - 2) + 1);  // drop the last whole line
  std::istringstream in(text);
  error_of([&] { read_log_jsonl(in); }, ErrorCode::ParseError);
}

TEST(Io, RecordLineFormat) {
  InteractionRecord r{3, "u2", "q9", {"g1", "r1"}, {1.0, 0.25, 2.0, 0.6}};
  EXPECT_EQ(record_to_json_line(r),
            R"({"t":3,"user":"u2","query":"q9","trajectory":["g1","r1"],"Q":1.0,"C":0.25,"L":2.0,"mu":0.6})");
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 2430.16, 1e-300, 0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
}
