// Copyright 2026 The ACAM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Sectioned `key = value` run configuration.

#ifndef ACAM_CONFIG_H_
#define ACAM_CONFIG_H_

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "acam/eval.h"
#include "acam/model.h"
#include "acam/synthgen.h"
#include "acam/training.h"

namespace acam::cli {

struct RunConfig {
  std::string interactions_path;
  std::string triples_path;
  // Attribute names in slot order; empty means first-seen order.
  std::vector<std::string> relations;
  std::string out_dir = "out";

  model::Hyperparams hyper;
  train::TrainConfig train;
  eval::SplitSpec split;
  eval::EvalOptions eval;
};

// One settable key. `set` throws std::invalid_argument on a bad value.
struct ConfigKey {
  std::string section;
  std::string key;
  std::string default_value;
  std::string help;
  std::function<void(const std::string&)> set;

  std::string qualified() const { return section + "." + key; }
};

// Keys bound to the fields of `config`; the defaults are its current values.
std::vector<ConfigKey> run_config_keys(RunConfig& config);
std::vector<ConfigKey> world_spec_keys(synth::WorldSpec& spec);

// Human-readable listing of keys and defaults for --help.
std::string describe_keys(const std::vector<ConfigKey>& keys);

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Reads an INI file into the keys, then applies `overrides`
// (qualified key -> value). Unknown keys and bad values are collected and
// reported together in one ConfigError. A missing file raises
// ConfigError("config not found: <path>"). `after_file` runs between the
// file and the overrides. With `problems`, key errors are appended there
// instead of thrown.
void apply_config_file(const std::string& path, std::vector<ConfigKey>& keys,
                       const Overrides& overrides,
                       const std::function<void()>& after_file = {},
                       std::vector<std::string>* problems = nullptr);

// Loads and validates a run configuration; `require_data` checks that the
// data paths are set and exist.
RunConfig load_run_config(const std::string& path, const Overrides& overrides,
                          bool require_data);

synth::WorldSpec load_world_spec(const std::string& path,
                                 const Overrides& overrides);

}  // namespace acam::cli

#endif  // ACAM_CONFIG_H_
