#include "fgrlhf/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

namespace {

std::string trim(const std::string& s) {
  std::size_t first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  std::size_t last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> raw;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " is not key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (raw.count(key)) throw ConfigError("duplicate config key '" + key + "'");
    raw[key] = value;
  }
  return raw;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double d = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
  }
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t i = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not an unsigned integer");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': '" + value + "' is not a boolean");
}

std::vector<double> to_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return from_string(text.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
  return from_map(parse_kv_text(text));
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& raw) {
  RunConfig cfg;
  for (const auto& [key, value] : raw) {
    if (key == "env.kind") cfg.env_kind = value;
    else if (key == "env.seed") cfg.env_seed = to_u64(key, value);
    else if (key == "env.train_size") cfg.sizes.train = static_cast<int>(to_int(key, value));
    else if (key == "env.dev_size") cfg.sizes.dev = static_cast<int>(to_int(key, value));
    else if (key == "env.test_size") cfg.sizes.test = static_cast<int>(to_int(key, value));
    else if (key == "env.t_max") cfg.t_max_override = static_cast<int>(to_int(key, value));
    else if (key == "init.mode") cfg.init.mode = init_mode_from_name(value);
    else if (key == "init.context_window") cfg.init.context_window = static_cast<int>(to_int(key, value));
    else if (key == "init.noise") cfg.init.noise = to_double(key, value);
    else if (key == "init.epochs") cfg.init.epochs = static_cast<int>(to_int(key, value));
    else if (key == "init.step_size") cfg.init.step_size = to_double(key, value);
    else if (key == "init.seed") cfg.init.seed = to_u64(key, value);
    else if (key == "trainer.gamma") cfg.ppo.gamma = to_double(key, value);
    else if (key == "trainer.lambda") cfg.ppo.lambda = to_double(key, value);
    else if (key == "trainer.epsilon") cfg.ppo.epsilon = to_double(key, value);
    else if (key == "trainer.beta") cfg.ppo.beta = to_double(key, value);
    else if (key == "trainer.step_size") cfg.ppo.step_size = to_double(key, value);
    else if (key == "trainer.value_step_size") cfg.ppo.value_step_size = to_double(key, value);
    else if (key == "trainer.episodes_total") cfg.ppo.episodes_total = to_int(key, value);
    else if (key == "trainer.batch_size") cfg.ppo.batch_size = static_cast<int>(to_int(key, value));
    else if (key == "trainer.ppo_inner_iters") cfg.ppo.ppo_inner_iters = static_cast<int>(to_int(key, value));
    else if (key == "trainer.samples_per_prompt") cfg.ppo.samples_per_prompt = static_cast<int>(to_int(key, value));
    else if (key == "trainer.seed") cfg.ppo.seed = to_u64(key, value);
    else if (key == "trainer.whiten_advantages") cfg.ppo.whiten_advantages = to_bool(key, value);
    else if (key == "trainer.eval_prompts") cfg.ppo.eval_prompts = static_cast<int>(to_int(key, value));
    else if (key == "trainer.eval_samples") cfg.ppo.eval_samples = static_cast<int>(to_int(key, value));
    else if (key == "sampler.mode") cfg.ppo.sampler.mode = sample_mode_from_name(value);
    else if (key == "sampler.p") cfg.ppo.sampler.p = to_double(key, value);
    else if (key == "sampler.k") cfg.ppo.sampler.k = static_cast<int>(to_int(key, value));
    else if (key == "sampler.temperature") cfg.ppo.sampler.temperature = to_double(key, value);
    else if (key == "rewards.kind") cfg.rewards_kind = value;
    else if (key == "rewards.w1") cfg.w1 = to_double(key, value);
    else if (key == "rewards.w2") cfg.w2 = to_double(key, value);
    else if (key == "rewards.w3") cfg.w3 = to_double(key, value);
    else if (key == "rewards.rm_dir") cfg.rm_dir = value;
    else if (key == "rm.outputs_per_prompt") cfg.rm_outputs_per_prompt = static_cast<int>(to_int(key, value));
    else if (key == "rm.step_size") cfg.rm_step_size = to_double(key, value);
    else if (key == "rm.max_epochs") cfg.rm_max_epochs = static_cast<int>(to_int(key, value));
    else if (key == "rm.holdout_fraction") cfg.rm_holdout_fraction = to_double(key, value);
    else if (key == "rm.patience") cfg.rm_patience = static_cast<int>(to_int(key, value));
    else if (key == "rm.seed") cfg.rm_seed = to_u64(key, value);
    else if (key == "rm.temperature") cfg.rm_temperature = to_double(key, value);
    else if (key == "compare.threshold") cfg.compare_threshold = to_double(key, value);
    else if (key == "customize.w1_values") cfg.customize_w1_values = to_double_list(key, value);
    else if (key == "run.dump_episodes") cfg.dump_episodes = to_bool(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  if (env_kind != "detox" && env_kind != "lfqa") {
    throw ConfigError("env.kind must be 'detox' or 'lfqa'");
  }
  if (rewards_kind != "detox_sentence" && rewards_kind != "detox_holistic" &&
      rewards_kind != "lfqa_oracle" && rewards_kind != "lfqa_learned") {
    throw ConfigError("rewards.kind must be one of detox_sentence, detox_holistic, "
                      "lfqa_oracle, lfqa_learned");
  }
  const bool detox_rewards = rewards_kind == "detox_sentence" || rewards_kind == "detox_holistic";
  if (detox_rewards != (env_kind == "detox")) {
    throw ConfigError("rewards.kind '" + rewards_kind + "' does not fit env.kind '" + env_kind + "'");
  }
  if (rewards_kind == "lfqa_learned" && rm_dir.empty()) {
    throw ConfigError("rewards.kind lfqa_learned requires rewards.rm_dir");
  }
  if (sizes.train < 1 || sizes.dev < 1 || sizes.test < 1) {
    throw ConfigError("env split sizes must be >= 1");
  }
  if (t_max_override < 0) throw ConfigError("env.t_max must be >= 0");
  if (init.context_window < 1) throw ConfigError("init.context_window must be >= 1");
  if (init.noise < 0.0) throw ConfigError("init.noise must be >= 0");
  if (init.epochs < 1) throw ConfigError("init.epochs must be >= 1");
  if (init.step_size <= 0.0) throw ConfigError("init.step_size must be > 0");
  if (!std::isfinite(w1) || !std::isfinite(w2) || !std::isfinite(w3)) {
    throw ConfigError("reward weights must be finite");
  }
  if (rm_outputs_per_prompt < 2) throw ConfigError("rm.outputs_per_prompt must be >= 2");
  if (rm_step_size <= 0.0) throw ConfigError("rm.step_size must be > 0");
  if (rm_max_epochs < 1) throw ConfigError("rm.max_epochs must be >= 1");
  if (rm_holdout_fraction < 0.0 || rm_holdout_fraction >= 1.0) {
    throw ConfigError("rm.holdout_fraction must be in [0, 1)");
  }
  if (rm_patience < 1) throw ConfigError("rm.patience must be >= 1");
  if (rm_temperature <= 0.0) throw ConfigError("rm.temperature must be > 0");
  if (compare_threshold < 0.0) throw ConfigError("compare.threshold must be >= 0");
  for (double v : customize_w1_values) {
    if (!std::isfinite(v)) throw ConfigError("customize.w1_values must be finite");
  }
  // Trainer ranges are validated against the env vocabulary at run time.
}

std::string RunConfig::resolved() const {
  std::ostringstream out;
  out << "compare.threshold = " << fmt(compare_threshold) << '\n';
  out << "customize.w1_values = ";
  for (std::size_t i = 0; i < customize_w1_values.size(); ++i) {
    if (i) out << ',';
    out << fmt(customize_w1_values[i]);
  }
  out << '\n';
  out << "env.dev_size = " << sizes.dev << '\n';
  out << "env.kind = " << env_kind << '\n';
  out << "env.seed = " << env_seed << '\n';
  out << "env.t_max = " << t_max_override << '\n';
  out << "env.test_size = " << sizes.test << '\n';
  out << "env.train_size = " << sizes.train << '\n';
  out << "init.context_window = " << init.context_window << '\n';
  out << "init.epochs = " << init.epochs << '\n';
  out << "init.mode = " << init_mode_name(init.mode) << '\n';
  out << "init.noise = " << fmt(init.noise) << '\n';
  out << "init.seed = " << init.seed << '\n';
  out << "init.step_size = " << fmt(init.step_size) << '\n';
  out << "rewards.kind = " << rewards_kind << '\n';
  out << "rewards.rm_dir = " << rm_dir << '\n';
  out << "rewards.w1 = " << fmt(w1) << '\n';
  out << "rewards.w2 = " << fmt(w2) << '\n';
  out << "rewards.w3 = " << fmt(w3) << '\n';
  out << "rm.holdout_fraction = " << fmt(rm_holdout_fraction) << '\n';
  out << "rm.max_epochs = " << rm_max_epochs << '\n';
  out << "rm.outputs_per_prompt = " << rm_outputs_per_prompt << '\n';
  out << "rm.patience = " << rm_patience << '\n';
  out << "rm.seed = " << rm_seed << '\n';
  out << "rm.step_size = " << fmt(rm_step_size) << '\n';
  out << "rm.temperature = " << fmt(rm_temperature) << '\n';
  out << "run.dump_episodes = " << (dump_episodes ? "true" : "false") << '\n';
  out << "sampler.k = " << ppo.sampler.k << '\n';
  out << "sampler.mode = " << sample_mode_name(ppo.sampler.mode) << '\n';
  out << "sampler.p = " << fmt(ppo.sampler.p) << '\n';
  out << "sampler.temperature = " << fmt(ppo.sampler.temperature) << '\n';
  out << "trainer.batch_size = " << ppo.batch_size << '\n';
  out << "trainer.beta = " << fmt(ppo.beta) << '\n';
  out << "trainer.epsilon = " << fmt(ppo.epsilon) << '\n';
  out << "trainer.episodes_total = " << ppo.episodes_total << '\n';
  out << "trainer.eval_prompts = " << ppo.eval_prompts << '\n';
  out << "trainer.eval_samples = " << ppo.eval_samples << '\n';
  out << "trainer.gamma = " << fmt(ppo.gamma) << '\n';
  out << "trainer.lambda = " << fmt(ppo.lambda) << '\n';
  out << "trainer.ppo_inner_iters = " << ppo.ppo_inner_iters << '\n';
  out << "trainer.samples_per_prompt = " << ppo.samples_per_prompt << '\n';
  out << "trainer.seed = " << ppo.seed << '\n';
  out << "trainer.step_size = " << fmt(ppo.step_size) << '\n';
  out << "trainer.value_step_size = " << fmt(ppo.value_step_size) << '\n';
  out << "trainer.whiten_advantages = " << (ppo.whiten_advantages ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace fgrlhf
