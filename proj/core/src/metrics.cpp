#include "fgrlhf/metrics.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <set>

#include "fgrlhf/errors.hpp"
#include "fgrlhf/mdp.hpp"

namespace fgrlhf {

std::vector<TokenId> sample_output(const PolicyParams& policy, const Prompt& prompt,
                                   const Vocabulary& vocab, int t_max,
                                   const SamplerConfig& sampler, RngStream& rng) {
  std::vector<TokenId> state = prompt.tokens;
  std::vector<TokenId> actions;
  for (int t = 1; t <= t_max; ++t) {
    const std::vector<double> dist = action_distribution(policy, state);
    const TokenId action = sample_action(dist, sampler, rng);
    actions.push_back(action);
    transition_in_place(state, action, vocab.size());
    if (is_terminal(actions, t, t_max, vocab.eos)) break;
  }
  return actions;
}

double max_toxicity(const Prompt& prompt, const PolicyParams& policy, int k,
                    const SamplerConfig& sampler, const ToxicityOracle& oracle,
                    const Vocabulary& vocab, int t_max, RngStream& rng) {
  if (k < 1) throw ConfigError("max_toxicity needs k >= 1");
  double worst = 0.0;
  for (int i = 0; i < k; ++i) {
    const std::vector<TokenId> y = sample_output(policy, prompt, vocab, t_max, sampler, rng);
    worst = std::max(worst, oracle.toxicity(y));
  }
  return worst;
}

std::optional<double> distinct_n(const std::vector<std::vector<TokenId>>& outputs, int n) {
  if (n < 1) throw ConfigError("distinct_n needs n >= 1");
  std::set<std::vector<TokenId>> seen;
  long long total = 0;
  for (const std::vector<TokenId>& y : outputs) {
    const int len = static_cast<int>(y.size());
    for (int start = 0; start + n <= len; ++start) {
      seen.insert(std::vector<TokenId>(y.begin() + start, y.begin() + start + n));
      ++total;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(seen.size()) / static_cast<double>(total);
}

double perplexity_proxy(const std::vector<PromptedOutput>& outputs,
                        const PolicyParams& reference) {
  double log_sum = 0.0;
  long long tokens = 0;
  for (const PromptedOutput& out : outputs) {
    std::vector<TokenId> state = out.prompt.tokens;
    for (TokenId action : out.tokens) {
      const std::vector<double> dist = action_distribution(reference, state);
      const double p = dist[static_cast<std::size_t>(action)];
      if (p <= 0.0) return std::numeric_limits<double>::infinity();
      log_sum += std::log(p);
      ++tokens;
      transition_in_place(state, action, reference.features.vocab_size);
    }
  }
  if (tokens == 0) throw ShapeError("perplexity proxy needs at least one generated token");
  return std::exp(-log_sum / static_cast<double>(tokens));
}

std::vector<double> reward_eval(const std::vector<PromptedOutput>& outputs,
                                const RewardEvalModels& models, const Vocabulary& vocab) {
  if (outputs.empty()) throw ShapeError("reward_eval needs at least one output");
  std::vector<double> results;
  for (const ClassifierRM* model : models.classifiers) {
    long long clean = 0, total = 0;
    for (const PromptedOutput& out : outputs) {
      const std::vector<Span> spans = segment(out.tokens, model->density, vocab);
      for (const Span& span : spans) {
        const std::vector<double> phi = model->features.extract(out.tokens, span);
        if (model->predicts_no_error(phi)) ++clean;
        ++total;
      }
    }
    results.push_back(total == 0 ? 0.0
                                 : static_cast<double>(clean) / static_cast<double>(total));
  }
  if (models.scalar) {
    double sum = 0.0;
    for (const PromptedOutput& out : outputs) sum += models.scalar->score(out.tokens);
    results.push_back(sum / static_cast<double>(outputs.size()));
  }
  return results;
}

std::vector<double> z_normalize(const std::vector<double>& series) {
  if (series.size() < 2) throw ShapeError("z_normalize needs at least two values");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  double variance = 0.0;
  for (double v : series) variance += (v - mean) * (v - mean);
  variance /= static_cast<double>(series.size());
  std::vector<double> out(series.size(), 0.0);
  if (variance <= 0.0) {
    std::cerr << "warning: z_normalize on zero-variance series, returning zeros\n";
    return out;
  }
  const double inv_std = 1.0 / std::sqrt(variance);
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = (series[i] - mean) * inv_std;
  return out;
}

namespace {

constexpr std::uint64_t kStreamEval = 0xEA7;

RngStream eval_stream(std::uint64_t seed, std::uint64_t salt, int prompt_id) {
  return RngStream::substream(seed ^ mix64(salt + 0x5a17), kStreamEval,
                              static_cast<std::uint64_t>(prompt_id));
}

}  // namespace

DetoxEvalResult detox_eval(const DetoxEnv& env, const std::vector<Prompt>& prompts,
                           const PolicyParams& policy, const PolicyParams& reference,
                           int samples_per_prompt, const SamplerConfig& sampler,
                           std::uint64_t seed, std::uint64_t salt) {
  if (prompts.empty()) throw ShapeError("detox_eval needs prompts");
  DetoxEvalResult result;
  std::vector<PromptedOutput> all;
  std::vector<std::vector<TokenId>> raw;
  double worst_sum = 0.0;
  double length_sum = 0.0;
  long long count = 0;
  for (const Prompt& prompt : prompts) {
    RngStream rng = eval_stream(seed, salt, prompt.id);
    double worst = 0.0;
    for (int s = 0; s < samples_per_prompt; ++s) {
      std::vector<TokenId> y =
          sample_output(policy, prompt, env.vocab, env.t_max, sampler, rng);
      worst = std::max(worst, env.oracle.toxicity(y));
      length_sum += static_cast<double>(y.size());
      ++count;
      raw.push_back(y);
      all.push_back(PromptedOutput{prompt, std::move(y)});
    }
    worst_sum += worst;
  }
  result.mean_max_toxicity = worst_sum / static_cast<double>(prompts.size());
  result.perplexity = perplexity_proxy(all, reference);
  const std::optional<double> d2 = distinct_n(raw, 2);
  result.distinct2 = d2.value_or(-1.0);
  result.mean_length = length_sum / static_cast<double>(count);
  return result;
}

LfqaEvalResult lfqa_eval(const LfqaEnv& env, const std::vector<Prompt>& prompts,
                         const PolicyParams& policy, const PolicyParams& reference,
                         int samples_per_prompt, const SamplerConfig& sampler,
                         std::uint64_t seed, std::uint64_t salt) {
  if (prompts.empty()) throw ShapeError("lfqa_eval needs prompts");
  LfqaEvalResult result;
  std::vector<PromptedOutput> all;
  double sub_sum = 0.0, sent_sum = 0.0, comp_sum = 0.0, length_sum = 0.0;
  long long sub_count = 0, sent_count = 0, output_count = 0;
  for (const Prompt& prompt : prompts) {
    const PromptSpec* spec = env.spec_for(prompt.id);
    if (spec == nullptr) throw ConfigError("prompt without spec in lfqa_eval");
    RngStream rng = eval_stream(seed, salt, prompt.id);
    for (int s = 0; s < samples_per_prompt; ++s) {
      std::vector<TokenId> y =
          sample_output(policy, prompt, env.vocab, env.t_max, sampler, rng);
      const LfqaOracleRewards rewards = lfqa_oracle_rewards(y, env.vocab, env.oracle, *spec);
      for (double r : rewards.subsentence) {
        sub_sum += r;
        ++sub_count;
      }
      for (double r : rewards.sentence) {
        sent_sum += r;
        ++sent_count;
      }
      comp_sum += rewards.sequence;
      length_sum += static_cast<double>(y.size());
      ++output_count;
      all.push_back(PromptedOutput{prompt, std::move(y)});
    }
  }
  result.subsentence_mean = sub_count ? sub_sum / static_cast<double>(sub_count) : 0.0;
  result.sentence_mean = sent_count ? sent_sum / static_cast<double>(sent_count) : 0.0;
  result.completeness_mean = comp_sum / static_cast<double>(output_count);
  result.mean_length = length_sum / static_cast<double>(output_count);
  result.perplexity = perplexity_proxy(all, reference);
  return result;
}

}  // namespace fgrlhf
