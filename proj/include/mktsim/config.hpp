#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mktsim/engine.hpp"

namespace mktsim {

using Json = nlohmann::json;

/// Reads a JSON config document. Throws ConfigInvalid naming the path on I/O or
/// syntax errors.
Json load_config_document(const std::filesystem::path& path);

/// Applies `key.path=value`; the value is parsed as JSON when possible, else kept as
/// a string. Array elements are addressed by index ("agents.0.latency=2").
void apply_override(Json& document, std::string_view assignment);

/// Builds and validates a scenario. Relative file references resolve against
/// `base_dir`. Unknown keys and missing files are ConfigInvalid.
ScenarioConfig config_from_document(const Json& document,
                                    const std::filesystem::path& base_dir);

/// Loads, applies overrides, and builds.
ScenarioConfig load_config(const std::filesystem::path& path,
                           std::span<const std::string> overrides = {});

/// Fully resolved form: defaults filled in, pool inlined, table paths absolute with
/// content hashes. Feeding it back through config_from_document yields an equal
/// document.
Json resolved_document(const ScenarioConfig& config);

/// Compact dump with sorted keys.
std::string canonical_text(const Json& document);

std::string sha256_hex(std::string_view bytes);

/// Hex SHA-256 of the canonical resolved document.
std::string config_digest(const ScenarioConfig& config);

}  // namespace mktsim
