// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace loranoise {

// Key order is part of the emitted-file contract: configs and reports are
// diffed byte-for-byte across runs.
using Json = nlohmann::ordered_json;

enum class Command {
  verify_identity,
  lemma1,
  gram_stats,
  tv_scaling,
  dp_compare,
  noise_profile,
  mia,
  ablate_r,
  moments,
};

std::string_view command_name(Command command);
std::optional<Command> parse_command(std::string_view name);
const std::vector<Command>& all_commands();

// Schema violation: carries the offending field path (e.g. "params.r").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::string field)
      : std::runtime_error(message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ExperimentConfig {
  Command command = Command::verify_identity;
  std::uint64_t seed = 1;
  std::size_t parallelism = 1;
  std::string output_dir;
  Json params;  // fully resolved: every schema key present

  bool operator==(const ExperimentConfig& other) const = default;
};

// Parameter schema for one command: name, JSON kind, default. A null
// default marks the parameter as required.
struct ParamSpec {
  enum class Kind { u64, f64, str, u64_list, boolean };
  std::string key;
  Kind kind = Kind::u64;
  Json default_value;
};
const std::vector<ParamSpec>& command_schema(Command command);

// Merges file values and flag overrides (flags win), applies defaults,
// and validates: unknown keys, wrong types, missing required fields, and
// out-of-range values all raise ConfigError with the field path.
ExperimentConfig resolve_config(Command command, const Json& file_values,
                                const Json& flag_values);

// Canonical full-form config; resolve_config(emit_config(c)) round-trips.
Json emit_config(const ExperimentConfig& config);

// Reads a config file; a manifest (object with "config" inside) is
// unwrapped so a run can be replayed from its own manifest.
Json load_config_file(const std::string& path);

struct RunResult {
  int exit_code = 0;        // 0 ok, 3 numeric failure (config errors throw)
  Json summary;             // machine-readable result echo
  std::string error;        // non-empty when exit_code != 0
  std::vector<std::string> outputs;  // file names written under output_dir
};

// Executes the command, writing outputs plus manifest.json into
// config.output_dir. Throws ConfigError for schema-level problems;
// numeric failures return exit_code 3.
RunResult run_experiment(const ExperimentConfig& config);

// Default output directory: $LORANOISE_OUTPUT_DIR or "loranoise-out",
// with the command name appended.
std::string default_output_dir(Command command);

}  // namespace loranoise
