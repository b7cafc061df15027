#include "mktsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "csv.hpp"
#include "mktsim/io.hpp"

namespace mktsim {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

/// Typed access to one JSON object that rejects keys nobody asked about.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_ + " must be an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) invalid("unknown key '" + where(key) + "'");
    }
  }

  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const Json& get(const std::string& key) {
    if (!has(key)) invalid("missing key '" + where(key) + "'");
    return j_.at(key);
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  std::string string(const std::string& key) {
    const auto& v = get(key);
    if (!v.is_string()) invalid(where(key) + " must be a string");
    return v.get<std::string>();
  }

  std::string string_or(const std::string& key, std::string fallback) {
    return has(key) ? string(key) : fallback;
  }

  double number(const std::string& key) {
    const auto& v = get(key);
    if (!v.is_number()) invalid(where(key) + " must be a number");
    return v.get<double>();
  }

  double number_or(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  std::int64_t integer(const std::string& key) {
    const auto& v = get(key);
    if (!v.is_number_integer()) invalid(where(key) + " must be an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      invalid(where(key) + " is out of range");
    }
    return v.get<std::int64_t>();
  }

  std::int64_t integer_or(const std::string& key, std::int64_t fallback) {
    return has(key) ? integer(key) : fallback;
  }

  bool boolean_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) invalid(where(key) + " must be a boolean");
    return v.get<bool>();
  }

  const Json& array(const std::string& key) {
    const auto& v = get(key);
    if (!v.is_array()) invalid(where(key) + " must be an array");
    return v;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) invalid("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

fs::path resolve_path(const fs::path& base_dir, const std::string& declared, const std::string& key) {
  fs::path p(declared);
  if (p.is_relative()) p = base_dir / p;
  if (!fs::exists(p)) invalid(key + ": file '" + p.string() + "' does not exist");
  return fs::absolute(p).lexically_normal();
}

struct Loader {
  fs::path base_dir;
  std::map<std::string, std::pair<std::shared_ptr<const ScoreTable>, std::string>> tables;

  OracleBinding binding(const Json& j, const std::string& path) {
    Section s(j, path);
    const auto kind = s.string("kind");
    if (kind == "constant") {
      return ConstantOracle{s.number("q")};
    }
    if (kind == "bernoulli") {
      BernoulliOracle b;
      b.p = s.number("p");
      auto read_map = [&](const std::string& key, std::map<std::string, double>& out) {
        if (!s.has(key)) return;
        const auto& m = s.get(key);
        if (!m.is_object()) invalid(s.where(key) + " must be an object");
        for (const auto& [k, v] : m.items()) {
          if (!v.is_number()) invalid(s.where(key) + "." + k + " must be a number");
          out[k] = v.get<double>();
        }
      };
      read_map("p_by_topic", b.p_by_topic);
      read_map("p_by_retriever", b.p_by_retriever);
      return b;
    }
    if (kind == "cached_table") {
      const auto file = resolve_path(base_dir, s.string("table"), s.where("table"));
      const auto key = file.string();
      if (!tables.count(key)) {
        std::shared_ptr<const ScoreTable> table;
        try {
          table = std::make_shared<const ScoreTable>(load_score_table(key));
        } catch (const Error& e) {
          invalid(s.where("table") + ": " + e.what());
        }
        tables[key] = {table, file_sha256(file)};
      }
      const auto& [table, digest] = tables[key];
      if (s.has("sha256") && s.string("sha256") != digest) {
        invalid(s.where("sha256") + ": table '" + key + "' changed since the config was resolved");
      }
      return CachedTableOracle{table, key, digest};
    }
    invalid(s.where("kind") + ": unknown oracle kind '" + kind + "'");
  }

  PolicyParams policy(const Json& j, const std::string& path) {
    Section s(j, path);
    PolicyParams p;
    p.exploration_rate = s.number_or("epsilon", p.exploration_rate);
    p.temperature = s.number_or("temperature", p.temperature);
    p.learning_rate = s.number_or("learning_rate", p.learning_rate);
    p.initial_preference = s.number_or("initial_preference", p.initial_preference);
    p.per_topic = s.boolean_or("per_topic", p.per_topic);
    try {
      validate(p);
    } catch (const Error& e) {
      invalid(path + ": " + e.what());
    }
    return p;
  }

  UtilityCoefficients coefficients(const Json& j, const std::string& path) {
    Section s(j, path);
    UtilityCoefficients c;
    c.alpha = s.number_or("alpha", c.alpha);
    c.beta = s.number_or("beta", c.beta);
    c.gamma = s.number_or("gamma", c.gamma);
    try {
      validate(c);
    } catch (const Error& e) {
      invalid(path + ": " + e.what());
    }
    return c;
  }

  std::vector<Query> pool(const Json& j) {
    Section s(j, "pool");
    const bool has_items = s.has("items");
    const bool has_file = s.has("file");
    if (has_items == has_file) invalid("pool needs exactly one of 'items' or 'file'");
    std::vector<Query> items;
    if (has_items) {
      const auto& arr = s.array("items");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Section item(arr[i], "pool.items." + std::to_string(i));
        Query q;
        q.id = item.string("id");
        if (item.has("topic")) q.topic = item.string("topic");
        if (item.has("payload")) q.payload = item.string("payload");
        items.push_back(std::move(q));
      }
      return items;
    }
    const auto file = resolve_path(base_dir, s.string("file"), "pool.file");
    const auto text = read_text_file(file.string());
    auto lines = detail::split_lines(text);
    if (lines.empty()) invalid("pool.file '" + file.string() + "' is empty");
    auto header = detail::split_csv_line(lines[0]);
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
    if (header.empty() || header[0] != "query_id") {
      invalid("pool.file '" + file.string() + "' line 1: header must start with query_id");
    }
    std::optional<std::size_t> topic_col, payload_col;
    for (std::size_t c = 1; c < header.size(); ++c) {
      if (header[c] == "topic") topic_col = c;
      else if (header[c] == "payload") payload_col = c;
      else invalid("pool.file '" + file.string() + "' line 1: unknown column '" + header[c] + "'");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto fields = detail::split_csv_line(lines[i]);
      if (fields.size() != header.size()) {
        invalid("pool.file '" + file.string() + "' line " + std::to_string(i + 1) +
                ": wrong field count");
      }
      Query q;
      q.id = fields[0];
      if (topic_col && !fields[*topic_col].empty()) q.topic = fields[*topic_col];
      if (payload_col && !fields[*payload_col].empty()) q.payload = fields[*payload_col];
      items.push_back(std::move(q));
    }
    return items;
  }
};

Json binding_document(const OracleBinding& binding) {
  return std::visit(
      [](const auto& b) -> Json {
        using T = std::decay_t<decltype(b)>;
        Json j;
        if constexpr (std::is_same_v<T, CachedTableOracle>) {
          j["kind"] = "cached_table";
          j["table"] = b.source;
          j["sha256"] = b.content_sha256;
        } else if constexpr (std::is_same_v<T, BernoulliOracle>) {
          j["kind"] = "bernoulli";
          j["p"] = b.p;
          if (!b.p_by_topic.empty()) j["p_by_topic"] = b.p_by_topic;
          if (!b.p_by_retriever.empty()) j["p_by_retriever"] = b.p_by_retriever;
        } else {
          j["kind"] = "constant";
          j["q"] = b.q;
        }
        return j;
      },
      binding);
}

Json policy_document(const PolicyParams& p) {
  return Json{{"epsilon", p.exploration_rate},
              {"temperature", p.temperature},
              {"learning_rate", p.learning_rate},
              {"initial_preference", p.initial_preference},
              {"per_topic", p.per_topic}};
}

Json coefficients_document(const UtilityCoefficients& c) {
  return Json{{"alpha", c.alpha}, {"beta", c.beta}, {"gamma", c.gamma}};
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string canonical_text(const Json& document) { return document.dump(); }

Json load_config_document(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) invalid("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return Json::parse(buffer.str());
  } catch (const nlohmann::json::exception& e) {
    invalid("config '" + path.string() + "': " + e.what());
  }
}

void apply_override(Json& document, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    invalid("override '" + std::string(assignment) + "' must look like key.path=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));

  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }

  Json* node = &document;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) invalid("override key '" + key + "' has an empty segment");
    if (node->is_array()) {
      std::size_t index = 0;
      auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), index);
      if (ec != std::errc{} || ptr != part.data() + part.size() || index >= node->size()) {
        invalid("override key '" + key + "': '" + part + "' is not a valid index");
      }
      node = &(*node)[index];
    } else {
      if (!node->is_object() && !node->is_null()) {
        invalid("override key '" + key + "': '" + part + "' descends into a scalar");
      }
      node = &(*node)[part];
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

ScenarioConfig config_from_document(const Json& document, const fs::path& base_dir) {
  Loader loader{base_dir, {}};
  ScenarioConfig config;
  Section root(document, "config");

  // users first: the user stakeholder's agents come from users.count.
  PolicyParams user_policy;
  {
    Section users(root.get("users"), "users");
    const auto count = users.integer("count");
    if (count < 1) invalid("users.count must be >= 1");
    config.users.count = static_cast<std::size_t>(count);
    if (users.has("coefficients")) {
      const auto& c = users.get("coefficients");
      if (c.is_array()) {
        for (std::size_t i = 0; i < c.size(); ++i) {
          config.users.coefficients.push_back(
              loader.coefficients(c[i], "users.coefficients." + std::to_string(i)));
        }
      } else {
        config.users.coefficients.assign(config.users.count,
                                         loader.coefficients(c, "users.coefficients"));
      }
    } else {
      config.users.coefficients.assign(config.users.count, UtilityCoefficients{});
    }
    if (users.has("policy")) user_policy = loader.policy(users.get("policy"), "users.policy");
  }

  std::vector<AgentProfile> profiles;
  {
    const auto& arr = root.array("agents");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "agents." + std::to_string(i);
      Section a(arr[i], path);
      AgentProfile p;
      p.id = a.string("id");
      p.stakeholder = a.string("stakeholder");
      p.unit_cost = a.number_or("unit_cost", 0.0);
      p.latency = a.number_or("latency", 0.0);
      if (a.has("quality_model")) p.quality_model = loader.binding(a.get("quality_model"), path + ".quality_model");
      p.entry_step = a.integer_or("entry_step", kFromStart);
      if (a.has("exit_step")) p.exit_step = a.integer("exit_step");
      profiles.push_back(std::move(p));
    }
  }

  if (root.has("schedule")) {
    const auto& arr = root.array("schedule");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "schedule." + std::to_string(i);
      Section e(arr[i], path);
      const auto agent = e.string("agent");
      auto it = std::find_if(profiles.begin(), profiles.end(),
                             [&](const AgentProfile& p) { return p.id == agent; });
      if (it == profiles.end()) invalid(path + ".agent: unknown agent '" + agent + "'");
      if (e.has("entry_step")) {
        const auto v = e.integer("entry_step");
        if (it->entry_step != kFromStart && it->entry_step != v) {
          invalid(path + ".entry_step conflicts with the agent's declared entry_step");
        }
        it->entry_step = v;
      }
      if (e.has("exit_step")) {
        const auto v = e.integer("exit_step");
        if (it->exit_step != kNever && it->exit_step != v) {
          invalid(path + ".exit_step conflicts with the agent's declared exit_step");
        }
        it->exit_step = v;
      }
    }
  }
  for (const auto& p : profiles) {
    if (p.entry_step < 1) invalid("agent '" + p.id + "': entry_step must be >= 1");
    if (p.entry_step >= p.exit_step) invalid("agent '" + p.id + "': entry_step must precede exit_step");
    if (p.unit_cost < 0.0 || p.latency < 0.0) invalid("agent '" + p.id + "': negative cost or latency");
  }

  {
    Section m(root.get("marketplace"), "marketplace");
    std::vector<Stakeholder> stakeholders;
    const auto& arr = m.array("stakeholders");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "marketplace.stakeholders." + std::to_string(i);
      Section s(arr[i], path);
      Stakeholder st;
      st.id = s.string("id");
      try {
        st.kind = stakeholder_kind_from_string(s.string("kind"));
      } catch (const Error& e) {
        invalid(path + ".kind: " + e.what());
      }
      if (st.kind == StakeholderKind::User) {
        if (s.has("policy")) invalid(path + ".policy: set the user policy under users.policy");
        for (std::size_t u = 0; u < config.users.count; ++u) st.agents.push_back(UserPopulation::user_id(u));
        config.policies[st.id] = user_policy;
      } else {
        if (s.has("policy")) config.policies[st.id] = loader.policy(s.get("policy"), path + ".policy");
        else config.policies[st.id] = PolicyParams{};
        for (const auto& p : profiles)
          if (p.stakeholder == st.id) st.agents.push_back(p.id);
      }
      stakeholders.push_back(std::move(st));
    }
    for (const auto& p : profiles) {
      if (std::none_of(stakeholders.begin(), stakeholders.end(),
                       [&](const Stakeholder& s) { return s.id == p.stakeholder; })) {
        invalid("agent '" + p.id + "': unknown stakeholder '" + p.stakeholder + "'");
      }
    }
    std::vector<Edge> edges;
    const auto& earr = m.array("edges");
    for (std::size_t i = 0; i < earr.size(); ++i) {
      Section e(earr[i], "marketplace.edges." + std::to_string(i));
      edges.push_back({e.string("from"), e.string("to")});
    }
    try {
      config.graph = build_graph(std::move(stakeholders), std::move(edges));
    } catch (const Error& e) {
      invalid(std::string("marketplace: ") + to_string(e.code()).data() + ": " + e.what());
    }
  }
  try {
    config.agents = AgentDirectory(std::move(profiles));
  } catch (const Error& e) {
    invalid(std::string("agents: ") + e.what());
  }

  try {
    config.pool = QueryPool(loader.pool(root.get("pool")));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    invalid(std::string("pool: ") + e.what());
  }

  if (root.has("oracle")) {
    Section o(root.get("oracle"), "oracle");
    config.default_oracle = loader.binding(o.get("binding"), "oracle.binding");
  }

  {
    Section s(root.get("simulation"), "simulation");
    auto& sim = config.simulation;
    sim.horizon = s.integer("T");
    sim.batch_size = s.integer("B");
    if (s.has("seed")) {
      const auto& v = s.get("seed");
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        invalid("simulation.seed must be a non-negative integer");
      }
      sim.seed = v.get<std::uint64_t>();
    }
    const auto sampling = s.string_or("sampling", "without_replacement");
    if (sampling == "without_replacement") sim.sampling = Sampling::WithoutReplacement;
    else if (sampling == "with_replacement") sim.sampling = Sampling::WithReplacement;
    else if (sampling == "cycled") sim.sampling = Sampling::Cycled;
    else invalid("simulation.sampling: unknown mode '" + sampling + "'");
    const auto mode = s.string_or("sync_mode", "async");
    if (mode == "async") sim.update_mode = UpdateMode::Immediate;
    else if (mode == "sync") sim.update_mode = UpdateMode::Synchronous;
    else invalid("simulation.sync_mode: unknown mode '" + mode + "'");
  }

  {
    auto& mset = config.metrics;
    Json empty = Json::object();
    Section s(root.has("metrics") ? root.get("metrics") : empty, "metrics");
    mset.window = s.integer_or("w", 10);
    mset.retention_m = s.integer_or("m", 10);
    if (s.has("market")) {
      mset.market = s.string("market");
    } else {
      for (const auto& st : config.graph.stakeholders()) {
        if (st.kind == StakeholderKind::Generator) {
          mset.market = st.id;
          break;
        }
      }
      if (mset.market.empty()) {
        for (const auto& st : config.graph.stakeholders()) {
          if (st.kind != StakeholderKind::User) {
            mset.market = st.id;
            break;
          }
        }
      }
    }
    if (s.has("target_exposure")) {
      Section te(s.get("target_exposure"), "metrics.target_exposure");
      const auto mode = te.string("mode");
      if (mode == "uniform") mset.target_exposure.mode = TargetExposureMode::Uniform;
      else if (mode == "merit_static") mset.target_exposure.mode = TargetExposureMode::MeritStatic;
      else if (mode == "merit_windowed") mset.target_exposure.mode = TargetExposureMode::MeritWindowed;
      else invalid("metrics.target_exposure.mode: unknown mode '" + mode + "'");
      if (mset.target_exposure.mode == TargetExposureMode::MeritStatic) {
        const auto& scores = te.get("scores");
        if (!scores.is_object()) invalid("metrics.target_exposure.scores must be an object");
        for (const auto& [k, v] : scores.items()) {
          if (!v.is_number()) invalid("metrics.target_exposure.scores." + k + " must be a number");
          mset.target_exposure.scores[k] = v.get<double>();
        }
      }
    }
  }

  if (root.has("perturbations")) {
    const auto& arr = root.array("perturbations");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "perturbations." + std::to_string(i);
      Section p(arr[i], path);
      Perturbation pert;
      pert.target = p.string("target");
      const auto knob = p.string("knob");
      if (knob == "latency_multiplier") pert.knob = PerturbationKnob::LatencyMultiplier;
      else if (knob == "quality_delta") pert.knob = PerturbationKnob::QualityDelta;
      else if (knob == "cost_multiplier") pert.knob = PerturbationKnob::CostMultiplier;
      else invalid(path + ".knob: unknown knob '" + knob + "'");
      pert.magnitude = p.number("magnitude");
      pert.active_from = p.integer_or("active_from", 1);
      config.perturbations.push_back(std::move(pert));
    }
  }

  validate(config);
  return config;
}

ScenarioConfig load_config(const fs::path& path, std::span<const std::string> overrides) {
  auto document = load_config_document(path);
  for (const auto& o : overrides) apply_override(document, o);
  auto base = path.parent_path();
  if (base.empty()) base = fs::current_path();
  return config_from_document(document, base);
}

Json resolved_document(const ScenarioConfig& config) {
  Json doc;
  const auto& graph = config.graph;

  Json stakeholders = Json::array();
  for (const auto& s : graph.stakeholders()) {
    Json j{{"id", s.id}, {"kind", std::string(to_string(s.kind))}};
    if (s.kind != StakeholderKind::User) j["policy"] = policy_document(config.policy_for(s.id));
    stakeholders.push_back(std::move(j));
  }
  Json edges = Json::array();
  for (const auto& e : graph.edges()) edges.push_back(Json{{"from", e.from}, {"to", e.to}});
  doc["marketplace"] = Json{{"stakeholders", stakeholders}, {"edges", edges}};

  Json agents = Json::array();
  Json schedule = Json::array();
  for (const auto& p : config.agents.profiles()) {
    Json j{{"id", p.id}, {"stakeholder", p.stakeholder}, {"unit_cost", p.unit_cost}, {"latency", p.latency}};
    if (p.quality_model) j["quality_model"] = binding_document(*p.quality_model);
    agents.push_back(std::move(j));
    if (p.entry_step != kFromStart || p.exit_step != kNever) {
      Json e{{"agent", p.id}, {"entry_step", p.entry_step}};
      if (p.exit_step != kNever) e["exit_step"] = p.exit_step;
      schedule.push_back(std::move(e));
    }
  }
  doc["agents"] = agents;
  doc["schedule"] = schedule;

  Json coefficients = Json::array();
  for (const auto& c : config.users.coefficients) coefficients.push_back(coefficients_document(c));
  doc["users"] = Json{{"count", config.users.count},
                      {"coefficients", coefficients},
                      {"policy", policy_document(config.policy_for(graph.user_stakeholder().id))}};

  Json items = Json::array();
  for (const auto& q : config.pool.items()) {
    Json j{{"id", q.id}};
    if (q.topic) j["topic"] = *q.topic;
    if (q.payload) j["payload"] = *q.payload;
    items.push_back(std::move(j));
  }
  doc["pool"] = Json{{"items", items}};

  if (config.default_oracle) doc["oracle"] = Json{{"binding", binding_document(*config.default_oracle)}};

  const auto& sim = config.simulation;
  doc["simulation"] = Json{{"T", sim.horizon},
                           {"B", sim.batch_size},
                           {"seed", sim.seed},
                           {"sampling", std::string(to_string(sim.sampling))},
                           {"sync_mode", std::string(to_string(sim.update_mode))}};

  const auto& m = config.metrics;
  Json te{{"mode", std::string(to_string(m.target_exposure.mode))}};
  if (m.target_exposure.mode == TargetExposureMode::MeritStatic) te["scores"] = m.target_exposure.scores;
  doc["metrics"] = Json{{"w", m.window}, {"m", m.retention_m}, {"market", m.market}, {"target_exposure", te}};

  Json perturbations = Json::array();
  for (const auto& p : config.perturbations) {
    perturbations.push_back(Json{{"target", p.target},
                                 {"knob", std::string(to_string(p.knob))},
                                 {"magnitude", p.magnitude},
                                 {"active_from", p.active_from}});
  }
  doc["perturbations"] = perturbations;
  return doc;
}

std::string config_digest(const ScenarioConfig& config) {
  return sha256_hex(canonical_text(resolved_document(config)));
}

}  // namespace mktsim
