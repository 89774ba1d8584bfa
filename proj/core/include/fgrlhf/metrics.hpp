#pragma once

#include <optional>
#include <vector>

#include "fgrlhf/envs.hpp"
#include "fgrlhf/episode.hpp"
#include "fgrlhf/policy.hpp"
#include "fgrlhf/reward_models.hpp"
#include "fgrlhf/rewards.hpp"
#include "fgrlhf/sampler.hpp"

namespace fgrlhf {

// One sampled output with its conditioning prompt, the unit most eval
// metrics consume.
struct PromptedOutput {
  Prompt prompt;
  std::vector<TokenId> tokens;
};

// Samples one output (tokens until eos or t_max) without recording
// log-probs.
std::vector<TokenId> sample_output(const PolicyParams& policy, const Prompt& prompt,
                                   const Vocabulary& vocab, int t_max,
                                   const SamplerConfig& sampler, RngStream& rng);

// Worst-case toxicity over k sampled outputs for one prompt.
double max_toxicity(const Prompt& prompt, const PolicyParams& policy, int k,
                    const SamplerConfig& sampler, const ToxicityOracle& oracle,
                    const Vocabulary& vocab, int t_max, RngStream& rng);

// Distinct n-grams / total n-grams, pooled over all outputs. Outputs
// shorter than n contribute nothing; no n-grams at all means the metric
// does not apply, reported as nullopt.
std::optional<double> distinct_n(const std::vector<std::vector<TokenId>>& outputs, int n);

// Fluency proxy: exp(-mean per-token log-prob) under a frozen reference
// policy, pooled over every generated token of every output. An output
// token with zero reference probability yields +infinity.
double perplexity_proxy(const std::vector<PromptedOutput>& outputs,
                        const PolicyParams& reference);

// Learned-RM eval: for each classifier, the fraction of segments (at the
// classifier's density, pooled over outputs) predicted "no error"; then,
// if present, the scalar head's mean score. Values appear in that order.
struct RewardEvalModels {
  std::vector<const ClassifierRM*> classifiers;
  const ScalarRM* scalar = nullptr;
};

std::vector<double> reward_eval(const std::vector<PromptedOutput>& outputs,
                                const RewardEvalModels& models, const Vocabulary& vocab);

// Z-normalization with population standard deviation. A zero-variance
// series normalizes to all zeros with a warning on stderr. Throws
// ShapeError for series shorter than 2.
std::vector<double> z_normalize(const std::vector<double>& series);

// ---------------------------------------------------------------------------
// Dev-set eval bundles used by the experiment harness. All sampling is
// derived from (seed, salt), so a fixed (policy, seed, salt) always scores
// identically.

struct DetoxEvalResult {
  double mean_max_toxicity = 0.0;  // mean over prompts of max-of-k toxicity
  double perplexity = 0.0;
  double distinct2 = 0.0;  // -1 when not applicable
  double mean_length = 0.0;
};

DetoxEvalResult detox_eval(const DetoxEnv& env, const std::vector<Prompt>& prompts,
                           const PolicyParams& policy, const PolicyParams& reference,
                           int samples_per_prompt, const SamplerConfig& sampler,
                           std::uint64_t seed, std::uint64_t salt);

struct LfqaEvalResult {
  double subsentence_mean = 0.0;  // mean oracle sub-sentence reward
  double sentence_mean = 0.0;     // mean oracle sentence reward
  double completeness_mean = 0.0; // mean coverage
  double mean_length = 0.0;
  double perplexity = 0.0;
};

LfqaEvalResult lfqa_eval(const LfqaEnv& env, const std::vector<Prompt>& prompts,
                         const PolicyParams& policy, const PolicyParams& reference,
                         int samples_per_prompt, const SamplerConfig& sampler,
                         std::uint64_t seed, std::uint64_t salt);

}  // namespace fgrlhf
