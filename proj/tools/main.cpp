// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner. Each subcommand resolves a config from an optional
// JSON file plus flag overrides, executes, and writes its outputs and a
// manifest.json into the output directory. Exit codes: 0 success,
// 2 config error, 3 runtime/numeric failure.

#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loranoise/experiments.hpp"

namespace {

using loranoise::Command;
using loranoise::ConfigError;
using loranoise::Json;

struct SubBinding {
  Command command = Command::verify_identity;
  CLI::App* sub = nullptr;
  std::string config_path;
  std::uint64_t seed = 1;
  std::size_t parallelism = 1;
  std::string output_dir;
  std::vector<std::string> params;
};

std::string describe(Command command) {
  switch (command) {
    case Command::verify_identity:
      return "Check the projected-update identity for frozen-factor adapter training";
    case Command::lemma1:
      return "Monte-Carlo check of the per-coordinate projection-noise law";
    case Command::gram_stats:
      return "Moments of Gram-matrix elements of rescaled Gaussian factors";
    case Command::tv_scaling:
      return "Distance-to-Gaussian scaling of projection noise over an (m, r) grid";
    case Command::dp_compare:
      return "Per-row noise profile: low-rank projection vs clipped-noisy batch gradient";
    case Command::noise_profile:
      return "Per-layer injected-noise measurements on a toy network";
    case Command::mia:
      return "Membership-inference study across fine-tuning methods";
    case Command::ablate_r:
      return "Membership-inference adapter-rank ablation";
    case Command::moments:
      return "Moment identities for chi-squared, variance-gamma, and normal-product laws";
  }
  return {};
}

std::string parameter_footer(Command command) {
  std::string footer = "Parameters (--param key=value):";
  for (const loranoise::ParamSpec& spec : loranoise::command_schema(command)) {
    footer += "\n  " + spec.key;
    if (spec.default_value.is_null()) {
      footer += "  (required)";
    } else {
      footer += "  (default " + spec.default_value.dump() + ")";
    }
  }
  return footer;
}

// "key=value" -> JSON entry; the value is parsed as JSON when possible and
// taken as a plain string otherwise, so `--param r=8` and `--param
// q_spec=ramp` both do the expected thing.
void apply_param(Json& params, const std::string& item) {
  const std::size_t pos = item.find('=');
  if (pos == std::string::npos || pos == 0) {
    throw ConfigError("--param expects key=value, got '" + item + "'", "params");
  }
  const std::string key = item.substr(0, pos);
  const std::string raw = item.substr(pos + 1);
  Json value = Json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  params[key] = value;
}

void print_error(const std::string& type, const std::string& field,
                 const std::string& message) {
  Json error = Json{{"type", type}, {"message", message}};
  if (!field.empty()) error["field"] = field;
  std::cout << Json{{"error", error}}.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loranoise: low-rank fine-tuning noise experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  std::vector<std::unique_ptr<SubBinding>> bindings;
  for (Command command : loranoise::all_commands()) {
    auto binding = std::make_unique<SubBinding>();
    binding->command = command;
    CLI::App* sub =
        app.add_subcommand(std::string(loranoise::command_name(command)), describe(command));
    sub->footer(parameter_footer(command));
    sub->add_option("-c,--config", binding->config_path,
                    "JSON config file (a manifest.json is accepted and replayed)");
    sub->add_option("-s,--seed", binding->seed, "Root seed (default 1)");
    sub->add_option("-j,--parallelism", binding->parallelism,
                    "Worker threads; results are independent of this (default 1)");
    sub->add_option("-o,--output-dir", binding->output_dir,
                    "Output directory (default $LORANOISE_OUTPUT_DIR or ./loranoise-out)");
    sub->add_option("-p,--param", binding->params,
                    "Override one parameter, key=value; repeatable");
    binding->sub = sub;
    bindings.push_back(std::move(binding));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("config-error", "", e.what());
    return 2;
  }

  const SubBinding* chosen = nullptr;
  for (const auto& binding : bindings) {
    if (binding->sub->parsed()) chosen = binding.get();
  }
  if (chosen == nullptr) {  // unreachable: require_subcommand(1)
    print_error("config-error", "", "no subcommand given");
    return 2;
  }

  try {
    const Json file_values = chosen->config_path.empty()
                                 ? Json()
                                 : loranoise::load_config_file(chosen->config_path);
    Json flag_values = Json::object();
    if (chosen->sub->count("--seed") > 0) flag_values["seed"] = chosen->seed;
    if (chosen->sub->count("--parallelism") > 0) {
      flag_values["parallelism"] = chosen->parallelism;
    }
    if (chosen->sub->count("--output-dir") > 0) {
      flag_values["output_dir"] = chosen->output_dir;
    }
    if (!chosen->params.empty()) {
      Json params = Json::object();
      for (const std::string& item : chosen->params) apply_param(params, item);
      flag_values["params"] = params;
    }

    const loranoise::ExperimentConfig config =
        loranoise::resolve_config(chosen->command, file_values, flag_values);
    const loranoise::RunResult result = loranoise::run_experiment(config);
    if (result.exit_code == 0) {
      std::cout << result.summary.dump(2) << "\n";
    } else {
      print_error("runtime-error", "", result.error);
    }
    return result.exit_code;
  } catch (const ConfigError& e) {
    print_error("config-error", e.field(), e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("runtime-error", "", e.what());
    return 3;
  }
}
