#pragma once

#include <iosfwd>
#include <string>

#include "mktsim/engine.hpp"

namespace mktsim {

/// {"t":..,"user":..,"query":..,"trajectory":[..],"Q":..,"C":..,"L":..,"mu":..}
std::string record_to_json_line(const InteractionRecord& record);

/// Header line first ({"digest": "<hex>"}), then one record per line.
void write_log_jsonl(const SimulationLog& log, std::ostream& out);
std::string log_to_jsonl(const SimulationLog& log);

/// Throws ParseError naming the 1-based line number.
SimulationLog read_log_jsonl(std::istream& in);
SimulationLog read_log_jsonl_file(const std::string& path);

void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

/// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace mktsim
