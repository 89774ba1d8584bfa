#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "fgrlhf/features.hpp"
#include "fgrlhf/matrix.hpp"
#include "fgrlhf/vocab.hpp"

namespace fgrlhf {

// Linear-softmax policy: logits(s) = W^T phi(s), P(a|s) = softmax(logits).
// W is (feature_dim x V).
struct PolicyParams {
  Matrix weights;
  FeatureExtractor features;

  int vocab_size() const { return features.vocab_size; }

  // Throws ShapeError / NumericalOverflowError on inconsistent or
  // non-finite parameters.
  void validate() const;

  // Binary round-trip, bit-exact. Header aux word stores context_window;
  // rows = feature_dim, cols = V.
  void save(const std::filesystem::path& path) const;
  static PolicyParams load(const std::filesystem::path& path);
};

// Linear value head: V(s) = w . phi(s).
struct ValueParams {
  std::vector<double> weights;
  FeatureExtractor features;

  void validate() const;
  void save(const std::filesystem::path& path) const;
  static ValueParams load(const std::filesystem::path& path);
};

// Full distribution over the vocabulary at temperature 1. This is the
// P_theta used by update ratios and the KL penalty; exploration-time
// shaping lives in the sampler. Throws NumericalOverflowError if any
// logit is non-finite.
std::vector<double> action_distribution(const PolicyParams& params,
                                        std::span<const TokenId> state);

double log_prob(const PolicyParams& params, std::span<const TokenId> state, TokenId action);

// grad_accum += scale * d log P(action|state) / dW, returning the
// log-probability. The gradient row for active feature f is
// scale * (1{v==action} - P(v|state)) over columns v.
double accumulate_logprob_grad(const PolicyParams& params, std::span<const TokenId> state,
                               TokenId action, double scale, Matrix& grad_accum);

// Dense gradient of log P(action|state) w.r.t. W, for gradient checks.
Matrix logprob_grad(const PolicyParams& params, std::span<const TokenId> state, TokenId action);

double value_estimate(const ValueParams& params, std::span<const TokenId> state);

// accum += scale * d V(s) / dw. The gradient is phi(s) itself.
void accumulate_value_grad(const ValueParams& params, std::span<const TokenId> state,
                           double scale, std::vector<double>& accum);

std::vector<double> value_grad(const ValueParams& params, std::span<const TokenId> state);

}  // namespace fgrlhf
