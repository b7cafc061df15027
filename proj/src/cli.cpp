#include "mktsim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mktsim/config.hpp"
#include "mktsim/engine.hpp"
#include "mktsim/io.hpp"
#include "mktsim/metrics.hpp"
#include "mktsim/validation.hpp"

namespace mktsim::cli {
namespace fs = std::filesystem;
using OrderedJson = nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw UsageError(what + " '" + path + "' does not exist");
}

std::string require_out(const std::string& out) {
  if (out.empty()) throw UsageError("--out DIR is required");
  fs::create_directories(out);
  return out;
}

struct GlobalOptions {
  std::string out;
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;
};

ScenarioConfig load(const std::string& path, std::vector<std::string> overrides,
                    const GlobalOptions& g) {
  require_file(path, "config");
  if (g.seed_override) overrides.push_back("simulation.seed=" + std::to_string(*g.seed_override));
  return load_config(path, overrides);
}

void write_run(const SimulationLog& log, const ScenarioConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  write_text_file((dir / "log.jsonl").string(), log_to_jsonl(log));
  write_text_file((dir / "config.resolved.json").string(), resolved_document(config).dump(2) + "\n");
}

std::optional<AgentId> first_entrant(const ScenarioConfig& config) {
  for (const auto& a : config.graph.stakeholder(config.metrics.market).agents) {
    if (config.agents.at(a).entry_step > 1) return a;
  }
  return std::nullopt;
}

OrderedJson seed_summary(const SimulationLog& log, const ScenarioConfig& config) {
  const auto horizon = config.simulation.horizon;
  const auto w = config.metrics.window;
  const auto& market = config.graph.stakeholder(config.metrics.market).agents;
  TrafficIndex traffic(log.records, market, horizon);
  OrderedJson j;
  j["seed"] = config.simulation.seed;
  j["status"] = "ok";
  const auto shares = traffic.market_share(horizon, w);
  j["final_window_hhi"] = hhi(shares.values);
  j["top_agent"] = shares.agents[static_cast<std::size_t>(top_index(shares.values, shares.agents))];
  if (auto entrant = first_entrant(config)) {
    const auto entry = config.agents.at(*entrant).entry_step;
    j["entrant"] = *entrant;
    j["entrant_share"] = shares.at(*entrant);
    if (entry <= horizon) {
      j["post_entry_share"] = traffic.market_share(horizon, horizon - entry + 1).at(*entrant);
      j["pre_entry_final_window_hhi"] = hhi(traffic.market_share(entry - 1, w).values);
    }
  } else {
    j["entrant"] = nullptr;
    j["entrant_share"] = nullptr;
  }
  return j;
}

std::vector<std::string> read_ranking(const std::string& path) {
  require_file(path, "ranking file");
  std::istringstream in(read_text_file(path));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t");
    ids.push_back(line.substr(b, e - b + 1));
  }
  return ids;
}

std::vector<double> read_samples(const std::string& path) {
  require_file(path, "sample file");
  std::string text = read_text_file(path);
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream in(text);
  std::vector<double> v;
  std::string token;
  while (in >> token) {
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), x);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      throw UsageError("sample file '" + path + "': '" + token + "' is not a number");
    }
    v.push_back(x);
  }
  return v;
}

OrderedJson report_json(const BootstrapResult* b, const std::string& statistic, double observed,
                        const std::vector<std::uint64_t>& seeds) {
  OrderedJson j;
  j["statistic"] = statistic;
  j["observed"] = observed;
  j["asl"] = b ? OrderedJson(b->asl) : OrderedJson(nullptr);
  j["ci_low"] = b ? OrderedJson(b->ci_low) : OrderedJson(nullptr);
  j["ci_high"] = b ? OrderedJson(b->ci_high) : OrderedJson(nullptr);
  j["resamples"] = b ? b->resamples : 0;
  j["seeds"] = seeds;
  return j;
}

void emit_report(const OrderedJson& report, const GlobalOptions& g, std::ostream& out) {
  const auto text = report.dump(2) + "\n";
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    write_text_file((fs::path(g.out) / "validation.json").string(), text);
  }
  out << text;
}

PerturbationKnob parse_knob(const std::string& s) {
  if (s == "latency_multiplier") return PerturbationKnob::LatencyMultiplier;
  if (s == "quality_delta") return PerturbationKnob::QualityDelta;
  if (s == "cost_multiplier") return PerturbationKnob::CostMultiplier;
  throw UsageError("unknown knob '" + s + "'");
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  std::set<std::uint64_t> seen;
  auto number = [&](std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
      throw Error(ErrorCode::ConfigInvalid, "bad seed '" + std::string(s) + "'");
    }
    return v;
  };
  auto add = [&](std::uint64_t v) {
    if (!seen.insert(v).second) throw Error(ErrorCode::ConfigInvalid, "duplicate seed " + std::to_string(v));
    seeds.push_back(v);
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto part = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (auto dots = part.find(".."); dots != std::string_view::npos) {
      const auto lo = number(part.substr(0, dots));
      const auto hi = number(part.substr(dots + 2));
      if (hi < lo) throw Error(ErrorCode::ConfigInvalid, "empty seed range '" + std::string(part) + "'");
      if (hi - lo >= 1'000'000) throw Error(ErrorCode::ConfigInvalid, "seed range too large");
      for (auto s = lo; s <= hi; ++s) add(s);
    } else {
      add(number(part));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (seeds.empty()) throw Error(ErrorCode::ConfigInvalid, "no seeds given");
  return seeds;
}

unsigned sweep_threads() {
  if (const char* env = std::getenv("MARKET_SIM_THREADS")) {
    unsigned v = 0;
    std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc{} && ptr == s.data() + s.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Seeded marketplace simulator for information-access agents", "market_sim"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  std::uint64_t seed_override = 0;
  app.add_option("--out", g.out, "Output directory");
  auto* seed_opt = app.add_option("--seed-override", seed_override, "Replace simulation.seed");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  std::string config_path, log_path;
  std::vector<std::string> overrides;

  auto* simulate = app.add_subcommand("simulate", "Run one scenario and write log.jsonl");
  simulate->add_option("config", config_path, "Scenario config (JSON)")->required();
  simulate->add_option("overrides", overrides, "key.path=value overrides");

  auto* metrics = app.add_subcommand("metrics", "Compute metric CSVs from a log");
  metrics->add_option("log", log_path, "log.jsonl")->required();
  metrics->add_option("config", config_path, "Scenario config the log was produced from")->required();

  std::string seeds_text;
  auto* sweep = app.add_subcommand("sweep", "Run one scenario under many seeds");
  sweep->add_option("config", config_path, "Scenario config (JSON)")->required();
  sweep->add_option("overrides", overrides, "key.path=value overrides");
  sweep->add_option("--seeds", seeds_text, "Seed list, e.g. 0..19")->required();

  auto* replay_cmd = app.add_subcommand("replay", "Re-run a log's config and check it record by record");
  replay_cmd->add_option("log", log_path, "log.jsonl")->required();
  replay_cmd->add_option("config", config_path, "Scenario config")->required();

  auto* validate_cmd = app.add_subcommand("validate", "Validation procedures");
  validate_cmd->require_subcommand(1);

  std::string file_a, file_b;
  auto* rankcorr = validate_cmd->add_subcommand("rankcorr", "Kendall tau between two ranking files");
  rankcorr->add_option("ranking_a", file_a, "One agent id per line")->required();
  rankcorr->add_option("ranking_b", file_b, "One agent id per line")->required();

  std::size_t resamples = kMinBootstrapResamples;
  std::uint64_t bootstrap_seed = 0;
  bool unpaired = false;
  auto* bootstrap = validate_cmd->add_subcommand("bootstrap", "Bootstrap ASL of a mean difference");
  bootstrap->add_option("samples_a", file_a, "Numbers, one per line")->required();
  bootstrap->add_option("samples_b", file_b, "Numbers, one per line")->required();
  bootstrap->add_option("--resamples", resamples, "Resample count (>= 1000)");
  bootstrap->add_option("--seed", bootstrap_seed, "Resampling seed");
  bootstrap->add_flag("--unpaired", unpaired, "Resample each side independently");

  std::string target, knob = "quality_delta";
  double magnitude = 0.0;
  std::int64_t active_from = 1;
  auto* perturb = validate_cmd->add_subcommand("perturb", "Paired baseline/perturbed runs");
  perturb->add_option("config", config_path, "Scenario config")->required();
  perturb->add_option("--target", target, "Perturbed agent (default: first market agent)");
  perturb->add_option("--knob", knob, "latency_multiplier | quality_delta | cost_multiplier");
  perturb->add_option("--magnitude", magnitude, "Multiplier or quality delta");
  perturb->add_option("--active-from", active_from, "First perturbed step");
  perturb->add_option("--seeds", seeds_text, "Seed list (default 0..19)");
  perturb->add_option("--resamples", resamples, "Bootstrap resamples over the paired deltas");

  std::vector<std::string> argv_store{"market_sim"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (*seed_opt) g.seed_override = seed_override;
  auto log_line = [&](const std::string& msg) {
    if (!g.quiet) err << msg << "\n";
  };

  try {
    if (*simulate) {
      const auto dir = require_out(g.out);
      const auto config = load(config_path, overrides, g);
      const auto log = run(config);
      write_run(log, config, dir);
      log_line("wrote " + std::to_string(log.records.size()) + " records to " +
               (fs::path(dir) / "log.jsonl").string());
      return kExitOk;
    }

    if (*metrics) {
      const auto dir = require_out(g.out);
      require_file(log_path, "log");
      const auto config = load(config_path, {}, g);
      const auto log = read_log_jsonl_file(log_path);
      const auto digest = config_digest(config);
      if (log.digest != digest) {
        throw Error(ErrorCode::DigestMismatch, "log digest " + log.digest +
                                                   " does not match config digest " + digest);
      }
      write_report(compute_report(log, config), digest, dir);
      log_line("wrote metrics to " + dir);
      return kExitOk;
    }

    if (*sweep) {
      const auto dir = require_out(g.out);
      const auto seeds = parse_seed_list(seeds_text);
      const auto base = load(config_path, overrides, g);
      std::vector<OrderedJson> summaries(seeds.size());
      std::atomic<std::size_t> next{0};
      std::mutex io_mutex;
      auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
          try {
            ScenarioConfig config = base;
            config.simulation.seed = seeds[i];
            const auto log = run(config);
            const fs::path seed_dir = fs::path(dir) / ("seed_" + std::to_string(seeds[i]));
            write_run(log, config, seed_dir);
            write_report(compute_report(log, config), log.digest, seed_dir.string());
            summaries[i] = seed_summary(log, config);
          } catch (const std::exception& e) {
            summaries[i] = OrderedJson{{"seed", seeds[i]}, {"status", "error"}, {"error", e.what()}};
            std::lock_guard lock(io_mutex);
            err << "seed " << seeds[i] << ": " << e.what() << "\n";
          }
        }
      };
      const unsigned threads = std::min<unsigned>(sweep_threads(), static_cast<unsigned>(seeds.size()));
      {
        std::vector<std::jthread> pool;
        for (unsigned k = 1; k < threads; ++k) pool.emplace_back(worker);
        worker();
      }
      bool failed = false;
      OrderedJson summary;
      summary["seeds"] = OrderedJson::array();
      for (auto& s : summaries) {
        failed = failed || s["status"] != "ok";
        summary["seeds"].push_back(std::move(s));
      }
      write_text_file((fs::path(dir) / "sweep_summary.json").string(), summary.dump(2) + "\n");
      log_line("swept " + std::to_string(seeds.size()) + " seeds into " + dir);
      return failed ? kExitRuntime : kExitOk;
    }

    if (*replay_cmd) {
      require_file(log_path, "log");
      const auto config = load(config_path, {}, g);
      const auto log = read_log_jsonl_file(log_path);
      const auto fresh = replay(log, config);
      out << "replay ok: " << fresh.records.size() << " records match\n";
      return kExitOk;
    }

    if (*rankcorr) {
      const auto a = read_ranking(file_a);
      const auto b = read_ranking(file_b);
      const double tau = rank_correlation(a, b);
      emit_report(report_json(nullptr, "kendall_tau_a", tau, {}), g, out);
      return kExitOk;
    }

    if (*bootstrap) {
      if (resamples < kMinBootstrapResamples) {
        throw UsageError("--resamples must be at least " + std::to_string(kMinBootstrapResamples));
      }
      const auto a = read_samples(file_a);
      const auto b = read_samples(file_b);
      RandomStream rng(bootstrap_seed, StreamDomain::Bootstrap, 0);
      const auto r = bootstrap_asl(a, b, resamples, rng, !unpaired);
      auto report = report_json(&r, r.statistic, r.observed, {bootstrap_seed});
      report["paired"] = r.paired;
      emit_report(report, g, out);
      return kExitOk;
    }

    if (*perturb) {
      if (resamples < kMinBootstrapResamples) {
        throw UsageError("--resamples must be at least " + std::to_string(kMinBootstrapResamples));
      }
      const auto config = load(config_path, {}, g);
      Perturbation p;
      p.target = target.empty() ? config.graph.stakeholder(config.metrics.market).agents.front() : target;
      p.knob = parse_knob(knob);
      p.magnitude = magnitude;
      p.active_from = active_from;
      if (p.knob != PerturbationKnob::QualityDelta && !(p.magnitude > 0.0)) {
        throw UsageError("--magnitude must be positive for multiplier knobs");
      }
      if (config.agents.find(p.target) == nullptr) throw UsageError("unknown --target '" + p.target + "'");
      const auto seeds = parse_seed_list(seeds_text.empty() ? "0..19" : seeds_text);
      if (seeds.size() < 2) throw UsageError("--seeds must name at least two seeds");
      const auto result = perturb_and_compare(config, p, seeds, sweep_threads());

      std::vector<double> deltas, zeros(seeds.size(), 0.0);
      OrderedJson rows = OrderedJson::array();
      for (const auto& d : result.deltas) {
        deltas.push_back(d.mean_share);
        rows.push_back(OrderedJson{{"seed", d.seed},
                                   {"mean_share", d.mean_share},
                                   {"retention", d.retention ? OrderedJson(*d.retention) : OrderedJson(nullptr)},
                                   {"final_hhi", d.final_hhi}});
      }
      RandomStream rng(0, StreamDomain::Bootstrap, 0);
      const auto r = bootstrap_asl(deltas, zeros, resamples, rng, true, "mean_share_delta");
      auto report = report_json(&r, "mean_share_delta:" + p.target, r.observed, seeds);
      report["knob"] = std::string(to_string(p.knob));
      report["magnitude"] = p.magnitude;
      report["active_from"] = p.active_from;
      report["deltas"] = rows;
      emit_report(report, g, out);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::ConfigInvalid:
      case ErrorCode::ParseError:
      case ErrorCode::DigestMismatch:
      case ErrorCode::SetMismatch:
      case ErrorCode::EmptySample:
      case ErrorCode::DomainError:
        return kExitUsage;
      default:
        return kExitRuntime;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace mktsim::cli
