#include "mktsim/io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace mktsim {

using OrderedJson = nlohmann::ordered_json;

std::string format_double(double value) { return fmt::format("{}", value); }

std::string record_to_json_line(const InteractionRecord& r) {
  OrderedJson j;
  j["t"] = r.t;
  j["user"] = r.user;
  j["query"] = r.query;
  j["trajectory"] = r.trajectory;
  j["Q"] = r.outcome.quality;
  j["C"] = r.outcome.cost;
  j["L"] = r.outcome.latency;
  j["mu"] = r.outcome.mu;
  return j.dump();
}

void write_log_jsonl(const SimulationLog& log, std::ostream& out) {
  OrderedJson header;
  header["digest"] = log.digest;
  header["records"] = log.records.size();
  out << header.dump() << '\n';
  for (const auto& r : log.records) out << record_to_json_line(r) << '\n';
}

std::string log_to_jsonl(const SimulationLog& log) {
  std::ostringstream out;
  write_log_jsonl(log, out);
  return out.str();
}

namespace {

InteractionRecord record_from_json(const OrderedJson& j) {
  static const char* kFields[] = {"t", "user", "query", "trajectory", "Q", "C", "L", "mu"};
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  for (const char* f : kFields)
    if (!j.contains(f)) throw std::invalid_argument(std::string("missing field '") + f + "'");
  if (j.size() != std::size(kFields)) throw std::invalid_argument("unexpected fields");
  InteractionRecord r;
  r.t = j.at("t").get<std::int64_t>();
  r.user = j.at("user").get<std::string>();
  r.query = j.at("query").get<std::string>();
  r.trajectory = j.at("trajectory").get<std::vector<std::string>>();
  r.outcome.quality = j.at("Q").get<double>();
  r.outcome.cost = j.at("C").get<double>();
  r.outcome.latency = j.at("L").get<double>();
  r.outcome.mu = j.at("mu").get<double>();
  return r;
}

}  // namespace

SimulationLog read_log_jsonl(std::istream& in) {
  SimulationLog log;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> declared;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = "log line " + std::to_string(line_no);
    if (line.empty()) throw Error(ErrorCode::ParseError, where + ": empty line");
    OrderedJson j;
    try {
      j = OrderedJson::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
    try {
      if (line_no == 1) {
        if (!j.is_object() || !j.contains("digest")) throw std::invalid_argument("missing header");
        log.digest = j.at("digest").get<std::string>();
        if (j.contains("records")) declared = j.at("records").get<std::size_t>();
      } else {
        log.records.push_back(record_from_json(j));
      }
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
  }
  if (line_no == 0) throw Error(ErrorCode::ParseError, "log line 1: missing header");
  if (declared && *declared != log.records.size()) {
    throw Error(ErrorCode::ParseError, "log line " + std::to_string(line_no + 1) +
                                           ": expected " + std::to_string(*declared) +
                                           " records, found " + std::to_string(log.records.size()));
  }
  return log;
}

SimulationLog read_log_jsonl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open log '" + path + "'");
  try {
    return read_log_jsonl(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error(ErrorCode::Io, "short write to '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace mktsim
