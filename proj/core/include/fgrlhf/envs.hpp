#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fgrlhf/episode.hpp"
#include "fgrlhf/policy.hpp"
#include "fgrlhf/rewards.hpp"
#include "fgrlhf/vocab.hpp"

namespace fgrlhf {

// Split sizes, proportioned like a scaled-down 3853/500/948.
struct EnvSizes {
  int train = 77;
  int dev = 10;
  int test = 19;
};

// Detoxification playground: prompts carry a per-prompt provocation level
// that controls how toxic the demonstration continuations (and hence the
// fitted initial policy) are in that context. Prompt ids are global across
// splits in train, dev, test order.
struct DetoxEnv {
  Vocabulary vocab;
  ToxicityOracle oracle;
  std::vector<Prompt> train, dev, test;
  std::vector<double> provocation;  // indexed by prompt id
  int t_max = 48;
  std::uint64_t seed = 0;

  int prompt_count() const {
    return static_cast<int>(train.size() + dev.size() + test.size());
  }
};

DetoxEnv generate_detox_env(std::uint64_t seed, const EnvSizes& sizes = {});

// Long-form QA playground. Each prompt references one of a small set of
// topics; the prompt's spec lists the topic's relevant tokens, the facts
// its passage supports (one topic fact is deliberately unsupported), and
// the units a complete answer must cover.
struct LfqaEnv {
  Vocabulary vocab;
  LfqaOracle oracle;
  std::vector<Prompt> train, dev, test;
  std::vector<PromptSpec> specs;  // indexed by prompt id
  int t_max = 200;
  std::uint64_t seed = 0;

  const PromptSpec* spec_for(int prompt_id) const;
  int prompt_count() const {
    return static_cast<int>(train.size() + dev.size() + test.size());
  }
};

LfqaEnv generate_lfqa_env(std::uint64_t seed, const EnvSizes& sizes = {});

// Demonstration continuation for one prompt, deterministic in the env seed.
// Detox demos mix toxic and clean tokens at the prompt's provocation level;
// QA demos are gold answers that cover every required unit, stay on topic,
// and cite only supported facts.
std::vector<TokenId> demo_continuation(const DetoxEnv& env, int prompt_id);
std::vector<TokenId> demo_continuation(const LfqaEnv& env, int prompt_id);

enum class InitMode { kRandom, kSftAnalog };

struct InitOptions {
  InitMode mode = InitMode::kSftAnalog;
  int context_window = 4;
  // kRandom: scale of normal weight noise; 0 gives the uniform policy.
  double noise = 0.0;
  // kSftAnalog: full-batch MLE fit on demo continuations.
  int epochs = 120;
  double step_size = 0.8;
  std::uint64_t seed = 0;
};

PolicyParams initial_policy(const DetoxEnv& env, const InitOptions& options);
PolicyParams initial_policy(const LfqaEnv& env, const InitOptions& options);

// Zero-initialized value head matching the policy's feature layout.
ValueParams initial_value(const PolicyParams& policy);

InitMode init_mode_from_name(const std::string& name);
const char* init_mode_name(InitMode m);

// Directory layout: vocab.txt (one token per line), meta.txt (key=value),
// train.txt/dev.txt/test.txt (one prompt per line, space-separated ids),
// provocation.txt (detox) or specs.txt (QA prompt spec records).
void save_env(const DetoxEnv& env, const std::filesystem::path& dir);
void save_env(const LfqaEnv& env, const std::filesystem::path& dir);
DetoxEnv load_detox_env(const std::filesystem::path& dir);
LfqaEnv load_lfqa_env(const std::filesystem::path& dir);

// Reads meta.txt and returns the env kind name ("detox" or "lfqa").
std::string env_kind(const std::filesystem::path& dir);

}  // namespace fgrlhf
