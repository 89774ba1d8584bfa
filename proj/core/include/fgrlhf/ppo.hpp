#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fgrlhf/episode.hpp"
#include "fgrlhf/policy.hpp"
#include "fgrlhf/rewards.hpp"
#include "fgrlhf/sampler.hpp"

namespace fgrlhf {

struct PPOConfig {
  double gamma = 1.0;
  double lambda = 0.95;
  double epsilon = 0.2;        // clip range
  double beta = 0.1;           // per-token KL penalty weight
  double step_size = 0.05;     // policy ascent step
  double value_step_size = 0.0;  // 0 means: use step_size
  long long episodes_total = 2048;
  int batch_size = 64;         // episodes per outer step
  int ppo_inner_iters = 4;     // mu
  int samples_per_prompt = 4;  // outputs sampled per drawn prompt
  int t_max = 48;
  std::uint64_t seed = 0;
  bool whiten_advantages = true;
  SamplerConfig sampler;
  int eval_prompts = 8;
  int eval_samples = 4;

  double effective_value_step() const {
    return value_step_size > 0.0 ? value_step_size : step_size;
  }

  void validate(int vocab_size) const;
};

// One sampled batch with everything the inner updates read. Advantages and
// targets are computed once at assembly (old policy, old value head) and
// stay frozen across the inner iterations, as do the episodes' sampling-
// time log-probs.
struct RolloutBatch {
  std::vector<Episode> episodes;
  std::vector<std::vector<double>> advantages;       // [episode][t]
  std::vector<std::vector<double>> value_targets;    // [episode][t]
  std::vector<std::vector<std::vector<int>>> state_features;  // [episode][t] active idx
  std::vector<std::vector<std::vector<double>>> segment_rewards;  // [episode][category][j]
};

// Mean-of-means clipped surrogate:
//
//   J = (1/|D|) sum_n (1/T_n) sum_t min(u_t A_t, clip(u_t, 1-eps, 1+eps) A_t)
//
// with u_t = P_new(a_t|s_t) / P_old(a_t|s_t). The gradient flows through
// the unclipped branch exactly when that branch attains the min; clipped
// tokens contribute zero gradient.
struct PolicyObjective {
  double value = 0.0;
  Matrix grad;
};

PolicyObjective ppo_policy_objective(const RolloutBatch& batch, const PolicyParams& params,
                                     double epsilon);

// Mean-of-means square error against the frozen targets:
//
//   L = (1/|D|) sum_n (1/T_n) sum_t (V(s_t) - target_t)^2
struct ValueObjective {
  double value = 0.0;
  std::vector<double> grad;
};

ValueObjective ppo_value_objective(const RolloutBatch& batch, const ValueParams& params);

// Everything a rollout needs. `policy` is the sampling policy, whose
// log-probs become the frozen "old" side of the update ratios.
struct RolloutContext {
  const PolicyParams* policy = nullptr;
  const PolicyParams* init_policy = nullptr;
  const Vocabulary* vocab = nullptr;
  int t_max = 0;
  SamplerConfig sampler;
};

// Samples one episode: tokens until eos or t_max, recording per-token
// log-probs under both the sampling policy and the frozen initial policy
// at temperature 1.
Episode rollout_episode(const RolloutContext& ctx, const Prompt& prompt, RngStream& rng);

// Scores episodes, combines per-token rewards, and computes advantages and
// value targets. The terminal bootstrap is 0 after eos and the old value
// estimate of the truncated state otherwise.
RolloutBatch assemble_batch(std::vector<Episode> episodes, const std::vector<RewardSpec>& specs,
                            const Vocabulary& vocab, const ValueParams& value_params,
                            const PPOConfig& config);

// Per-step metric log with a stable CSV rendering (%.17g), so identical
// runs serialize to identical bytes.
struct MetricLog {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write_csv(const std::filesystem::path& path) const;
  std::string to_csv() const;

  int column_index(const std::string& name) const;  // -1 if absent
};

// Extra dev-set columns appended to every metric row.
struct EvalHook {
  std::vector<std::string> columns;
  std::function<std::vector<double>(const PolicyParams& policy, int step)> run;
};

struct TrainResult {
  PolicyParams policy;
  ValueParams value;
  MetricLog metrics;
  long long episodes_seen = 0;
};

// Outer loop: sample prompts, roll out, assemble, then mu alternating
// full-batch policy/value steps per batch. Row 0 of the metric log is a
// probe batch under the initial parameters with no updates applied, so the
// log always records where training started. Throws TrainingAbortError with
// an episode dump when an objective or parameter goes non-finite. When
// episode_dump is non-null every rolled-out episode is appended to it as a
// dump line.
TrainResult train(const PPOConfig& config, const Vocabulary& vocab,
                  const std::vector<Prompt>& train_prompts,
                  const std::vector<RewardSpec>& specs, const PolicyParams& init_policy,
                  const ValueParams& init_value, const EvalHook* eval_hook = nullptr,
                  std::vector<std::string>* episode_dump = nullptr);

// Line format shared by episode dumps and abort diagnostics:
// prompt_id <TAB> actions <TAB> per-token rewards.
std::string episode_dump_line(const Episode& episode);

}  // namespace fgrlhf
