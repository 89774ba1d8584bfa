#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fgrlhf/envs.hpp"
#include "fgrlhf/ppo.hpp"

namespace fgrlhf {

// Flat key-value run configuration with dotted section prefixes
// (trainer.gamma, env.kind, rewards.w1). Lines are `key = value`; '#'
// starts a comment. Every key must be in the schema; unknown keys are
// rejected by name.
struct RunConfig {
  // env.*
  std::string env_kind = "detox";
  std::uint64_t env_seed = 1;
  EnvSizes sizes;
  int t_max_override = 0;  // 0 keeps the env default

  // init.*
  InitOptions init;

  // trainer.* and sampler.*
  PPOConfig ppo;

  // rewards.*
  std::string rewards_kind = "detox_sentence";
  double w1 = 0.3;
  double w2 = 0.5;
  double w3 = 0.3;
  std::string rm_dir;

  // rm.* (reward-model training entry)
  int rm_outputs_per_prompt = 8;
  double rm_step_size = 0.5;
  int rm_max_epochs = 2000;
  double rm_holdout_fraction = 0.2;
  int rm_patience = 50;
  std::uint64_t rm_seed = 0;
  double rm_temperature = 1.3;  // sampling temperature for the feedback corpus

  // compare.* / customize.*
  double compare_threshold = 0.05;
  std::vector<double> customize_w1_values = {0.4, 0.3, 0.2};

  // run.*
  bool dump_episodes = false;

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_string(const std::string& text);
  static RunConfig from_map(const std::map<std::string, std::string>& raw);

  // Full resolved snapshot, one sorted key per line; parsing it back gives
  // an identical config.
  std::string resolved() const;

  void validate() const;
};

}  // namespace fgrlhf
