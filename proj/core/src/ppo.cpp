#include "fgrlhf/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fgrlhf/errors.hpp"
#include "fgrlhf/gae.hpp"
#include "fgrlhf/mdp.hpp"

namespace fgrlhf {

void PPOConfig::validate(int vocab_size) const {
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0, 1]");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0, 1]");
  if (epsilon <= 0.0) throw ConfigError("epsilon must be > 0");
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  if (step_size <= 0.0) throw ConfigError("step size must be > 0");
  if (value_step_size < 0.0) throw ConfigError("value step size must be >= 0");
  if (episodes_total < 1) throw ConfigError("episodes_total must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (ppo_inner_iters < 1) throw ConfigError("inner iteration count must be >= 1");
  if (samples_per_prompt < 1) throw ConfigError("samples per prompt must be >= 1");
  if (batch_size % samples_per_prompt != 0) {
    throw ConfigError("batch size must be a multiple of samples per prompt");
  }
  if (t_max < 1) throw ConfigError("t_max must be >= 1");
  if (eval_prompts < 1) throw ConfigError("eval prompt count must be >= 1");
  if (eval_samples < 1) throw ConfigError("eval sample count must be >= 1");
  sampler.validate(vocab_size);
}

Episode rollout_episode(const RolloutContext& ctx, const Prompt& prompt, RngStream& rng) {
  Episode ep;
  ep.prompt = prompt;
  std::vector<TokenId> state = prompt.tokens;
  const int vocab_size = ctx.vocab->size();
  for (int t = 1; t <= ctx.t_max; ++t) {
    const std::vector<double> dist = action_distribution(*ctx.policy, state);
    const TokenId action = sample_action(dist, ctx.sampler, rng);
    const std::vector<double> init_dist = action_distribution(*ctx.init_policy, state);
    ep.actions.push_back(action);
    ep.logp_policy.push_back(std::log(dist[static_cast<std::size_t>(action)]));
    ep.logp_init.push_back(std::log(init_dist[static_cast<std::size_t>(action)]));
    transition_in_place(state, action, vocab_size);
    if (is_terminal(ep.actions, t, ctx.t_max, ctx.vocab->eos)) break;
  }
  ep.terminated_by_eos = !ep.actions.empty() && ep.actions.back() == ctx.vocab->eos;
  return ep;
}

RolloutBatch assemble_batch(std::vector<Episode> episodes, const std::vector<RewardSpec>& specs,
                            const Vocabulary& vocab, const ValueParams& value_params,
                            const PPOConfig& config) {
  RolloutBatch batch;
  batch.episodes = std::move(episodes);
  const std::size_t count = batch.episodes.size();
  batch.advantages.resize(count);
  batch.value_targets.resize(count);
  batch.state_features.resize(count);
  batch.segment_rewards.resize(count);

  for (std::size_t i = 0; i < count; ++i) {
    Episode& ep = batch.episodes[i];
    const int total = ep.length();
    if (total == 0) throw ShapeError("assemble_batch: empty episode");

    const SegmentMap map = build_segment_map(ep.actions, specs, vocab);
    std::vector<std::vector<double>>& scores = batch.segment_rewards[i];
    scores.reserve(specs.size());
    for (std::size_t k = 0; k < specs.size(); ++k) {
      scores.push_back(
          specs[k].scorer->score(ep.prompt, ep.actions, map.categories[k].segments));
    }
    ep.rewards = combine_token_rewards(ep, map, specs, scores, config.beta);

    // States s_1..s_{T+1}; feature cache for s_1..s_T.
    std::vector<TokenId> state = ep.prompt.tokens;
    std::vector<double> values(static_cast<std::size_t>(total) + 1, 0.0);
    auto& features = batch.state_features[i];
    features.resize(static_cast<std::size_t>(total));
    for (int t = 0; t < total; ++t) {
      value_params.features.active_indices(state, features[static_cast<std::size_t>(t)]);
      values[static_cast<std::size_t>(t)] = value_estimate(value_params, state);
      transition_in_place(state, ep.actions[static_cast<std::size_t>(t)], vocab.size());
    }
    // Terminal bootstrap: eos ends the episode with no tail value; a t_max
    // truncation bootstraps from the old value head.
    values[static_cast<std::size_t>(total)] =
        ep.terminated_by_eos ? 0.0 : value_estimate(value_params, state);

    batch.advantages[i] = compute_gae(ep.rewards, values, config.gamma, config.lambda);
    batch.value_targets[i] = compute_value_targets(
        ep.rewards, values[static_cast<std::size_t>(total - 1)], config.gamma);
  }

  if (config.whiten_advantages) whiten(batch.advantages);
  return batch;
}

PolicyObjective ppo_policy_objective(const RolloutBatch& batch, const PolicyParams& params,
                                     double epsilon) {
  PolicyObjective result;
  result.grad = Matrix(params.weights.rows(), params.weights.cols());
  const std::size_t count = batch.episodes.size();
  if (count == 0) throw ShapeError("policy objective: empty batch");
  const double inv_episodes = 1.0 / static_cast<double>(count);
  const int vocab = params.features.vocab_size;

  for (std::size_t i = 0; i < count; ++i) {
    const Episode& ep = batch.episodes[i];
    const int total = ep.length();
    const double inv_tokens = 1.0 / static_cast<double>(total);
    const auto& features = batch.state_features[i];
    for (int t = 0; t < total; ++t) {
      const std::vector<int>& active = features[static_cast<std::size_t>(t)];
      // Fresh distribution under the current parameters.
      std::vector<double> logits(static_cast<std::size_t>(vocab), 0.0);
      for (int f : active) {
        const double* row = params.weights.row(f);
        for (int v = 0; v < vocab; ++v) logits[static_cast<std::size_t>(v)] += row[v];
      }
      double max_logit = logits[0];
      for (double l : logits) max_logit = std::max(max_logit, l);
      double total_mass = 0.0;
      for (double& l : logits) {
        l = std::exp(l - max_logit);
        total_mass += l;
      }
      const TokenId action = ep.actions[static_cast<std::size_t>(t)];
      const double p_new = logits[static_cast<std::size_t>(action)] / total_mass;
      const double logp_new = std::log(p_new);
      const double ratio = std::exp(logp_new - ep.logp_policy[static_cast<std::size_t>(t)]);
      const double advantage = batch.advantages[i][static_cast<std::size_t>(t)];

      const double unclipped = ratio * advantage;
      const double clipped =
          std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage;
      const double scale = inv_episodes * inv_tokens;
      result.value += scale * std::min(unclipped, clipped);

      if (unclipped <= clipped) {
        // d(ratio*A)/dW = ratio * A * dlogp/dW.
        const double coeff = scale * ratio * advantage;
        for (int f : active) {
          double* row = result.grad.row(f);
          for (int v = 0; v < vocab; ++v) {
            const double prob_v = logits[static_cast<std::size_t>(v)] / total_mass;
            row[v] += coeff * ((v == action ? 1.0 : 0.0) - prob_v);
          }
        }
      }
    }
  }
  return result;
}

ValueObjective ppo_value_objective(const RolloutBatch& batch, const ValueParams& params) {
  ValueObjective result;
  result.grad.assign(params.weights.size(), 0.0);
  const std::size_t count = batch.episodes.size();
  if (count == 0) throw ShapeError("value objective: empty batch");
  const double inv_episodes = 1.0 / static_cast<double>(count);

  for (std::size_t i = 0; i < count; ++i) {
    const Episode& ep = batch.episodes[i];
    const int total = ep.length();
    const double inv_tokens = 1.0 / static_cast<double>(total);
    const auto& features = batch.state_features[i];
    for (int t = 0; t < total; ++t) {
      const std::vector<int>& active = features[static_cast<std::size_t>(t)];
      double v = 0.0;
      for (int f : active) v += params.weights[static_cast<std::size_t>(f)];
      const double err = v - batch.value_targets[i][static_cast<std::size_t>(t)];
      const double scale = inv_episodes * inv_tokens;
      result.value += scale * err * err;
      const double coeff = scale * 2.0 * err;
      for (int f : active) result.grad[static_cast<std::size_t>(f)] += coeff;
    }
  }
  return result;
}

std::string episode_dump_line(const Episode& episode) {
  std::ostringstream out;
  out << episode.prompt.id << '\t';
  for (int i = 0; i < episode.length(); ++i) {
    if (i) out << ' ';
    out << episode.actions[static_cast<std::size_t>(i)];
  }
  out << '\t';
  char buf[32];
  for (std::size_t i = 0; i < episode.rewards.size(); ++i) {
    if (i) out << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", episode.rewards[i]);
    out << buf;
  }
  return out.str();
}

namespace {

std::string format_cell(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string batch_dump(const RolloutBatch& batch) {
  std::ostringstream out;
  for (const Episode& ep : batch.episodes) out << episode_dump_line(ep) << '\n';
  return out.str();
}

}  // namespace

std::string MetricLog::to_csv() const {
  std::ostringstream out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out << ',';
    out << columns[c];
  }
  out << '\n';
  for (const std::vector<double>& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_cell(row[c]);
    }
    out << '\n';
  }
  return out.str();
}

void MetricLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out << to_csv();
}

int MetricLog::column_index(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return static_cast<int>(c);
  }
  return -1;
}

TrainResult train(const PPOConfig& config, const Vocabulary& vocab,
                  const std::vector<Prompt>& train_prompts,
                  const std::vector<RewardSpec>& specs, const PolicyParams& init_policy,
                  const ValueParams& init_value, const EvalHook* eval_hook,
                  std::vector<std::string>* episode_dump) {
  config.validate(vocab.size());
  if (train_prompts.empty()) throw ConfigError("no training prompts");
  if (specs.empty()) throw ConfigError("no reward specs");
  for (const RewardSpec& s : specs) s.validate();
  init_policy.validate();
  init_value.validate();

  TrainResult result;
  result.policy = init_policy;
  result.value = init_value;

  result.metrics.columns = {"step", "episodes_seen"};
  for (const RewardSpec& s : specs) {
    result.metrics.columns.push_back("mean_reward_cat_" + std::to_string(s.category));
  }
  result.metrics.columns.push_back("mean_kl");
  result.metrics.columns.push_back("policy_objective");
  result.metrics.columns.push_back("value_loss");
  if (eval_hook) {
    for (const std::string& c : eval_hook->columns) result.metrics.columns.push_back(c);
  }

  const int prompts_per_step = config.batch_size / config.samples_per_prompt;
  const double value_step = config.effective_value_step();
  long long episodes_seen = 0;
  int step = 0;

  RolloutContext ctx;
  ctx.policy = &result.policy;
  ctx.init_policy = &init_policy;
  ctx.vocab = &vocab;
  ctx.t_max = config.t_max;
  ctx.sampler = config.sampler;

  // Prompt draws and episode sampling run on decoupled streams keyed by
  // seed, purpose, and position, so any single episode is reproducible.
  auto sample_batch = [&](std::uint64_t prompt_stream, std::uint64_t episode_stream,
                          std::uint64_t prompt_pos, long long episode_base) {
    RngStream prompt_rng = RngStream::substream(config.seed, prompt_stream, prompt_pos);
    std::vector<Episode> episodes;
    episodes.reserve(static_cast<std::size_t>(config.batch_size));
    for (int p = 0; p < prompts_per_step; ++p) {
      const Prompt& prompt =
          train_prompts[static_cast<std::size_t>(prompt_rng.uniform_int(
              0, static_cast<int>(train_prompts.size()) - 1))];
      for (int s = 0; s < config.samples_per_prompt; ++s) {
        RngStream episode_rng = RngStream::substream(
            config.seed, episode_stream,
            static_cast<std::uint64_t>(episode_base) + episodes.size());
        episodes.push_back(rollout_episode(ctx, prompt, episode_rng));
      }
    }
    RolloutBatch batch =
        assemble_batch(std::move(episodes), specs, vocab, result.value, config);
    if (episode_dump) {
      for (const Episode& ep : batch.episodes) episode_dump->push_back(episode_dump_line(ep));
    }
    return batch;
  };

  auto append_metric_row = [&](const RolloutBatch& batch) {
    std::vector<double> row;
    row.push_back(static_cast<double>(step));
    row.push_back(static_cast<double>(episodes_seen));
    for (std::size_t k = 0; k < specs.size(); ++k) {
      double total_score = 0.0;
      for (const auto& per_episode : batch.segment_rewards) {
        const std::vector<double>& scores = per_episode[k];
        double s = 0.0;
        for (double r : scores) s += r;
        total_score += scores.empty() ? 0.0 : s / static_cast<double>(scores.size());
      }
      row.push_back(total_score / static_cast<double>(batch.episodes.size()));
    }
    double kl_sum = 0.0;
    long long token_count = 0;
    for (const Episode& ep : batch.episodes) {
      for (int t = 0; t < ep.length(); ++t) {
        kl_sum += ep.logp_policy[static_cast<std::size_t>(t)] -
                  ep.logp_init[static_cast<std::size_t>(t)];
        ++token_count;
      }
    }
    row.push_back(kl_sum / static_cast<double>(token_count));
    row.push_back(ppo_policy_objective(batch, result.policy, config.epsilon).value);
    row.push_back(ppo_value_objective(batch, result.value).value);
    if (eval_hook) {
      const std::vector<double> eval_row = eval_hook->run(result.policy, step);
      if (eval_row.size() != eval_hook->columns.size()) {
        throw ShapeError("eval hook returned wrong number of columns");
      }
      for (double v : eval_row) row.push_back(v);
    }
    result.metrics.rows.push_back(std::move(row));
  };

  // Step 0: measure the initial policy on a probe batch, applying no updates.
  // Its divergence from the frozen reference is exactly zero by construction.
  {
    RolloutBatch probe = sample_batch(0xA10, 0xE90, 0, 0);
    append_metric_row(probe);
  }

  while (episodes_seen < config.episodes_total) {
    ++step;
    RolloutBatch batch = sample_batch(0xA11, 0xE91, static_cast<std::uint64_t>(step),
                                      episodes_seen);

    for (int it = 0; it < config.ppo_inner_iters; ++it) {
      PolicyObjective pol = ppo_policy_objective(batch, result.policy, config.epsilon);
      if (!std::isfinite(pol.value)) {
        throw TrainingAbortError("policy objective is not finite at step " + std::to_string(step),
                                 batch_dump(batch));
      }
      result.policy.weights.axpy(config.step_size, pol.grad);
      if (!result.policy.weights.all_finite()) {
        throw TrainingAbortError("policy weights diverged at step " + std::to_string(step),
                                 batch_dump(batch));
      }
      ValueObjective val = ppo_value_objective(batch, result.value);
      if (!std::isfinite(val.value)) {
        throw TrainingAbortError("value loss is not finite at step " + std::to_string(step),
                                 batch_dump(batch));
      }
      for (std::size_t f = 0; f < result.value.weights.size(); ++f) {
        result.value.weights[f] -= value_step * val.grad[f];
      }
      for (double w : result.value.weights) {
        if (!std::isfinite(w)) {
          throw TrainingAbortError("value weights diverged at step " + std::to_string(step),
                                   batch_dump(batch));
        }
      }
    }

    episodes_seen += static_cast<long long>(batch.episodes.size());
    append_metric_row(batch);
  }

  result.episodes_seen = episodes_seen;
  return result;
}

}  // namespace fgrlhf
