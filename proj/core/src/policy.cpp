#include "fgrlhf/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

void FeatureExtractor::active_indices(std::span<const TokenId> state,
                                      std::vector<int>& out) const {
  out.clear();
  const int len = static_cast<int>(state.size());
  const int blocks = std::min(context_window, len);
  for (int i = 0; i < blocks; ++i) {
    const TokenId tok = state[static_cast<std::size_t>(len - 1 - i)];
    if (tok < 0 || tok >= vocab_size) {
      throw InvalidTokenError("feature extraction: token " + std::to_string(tok) +
                              " outside vocabulary of size " + std::to_string(vocab_size));
    }
    out.push_back(i * vocab_size + tok);
  }
  out.push_back(bias_index());
}

std::vector<double> FeatureExtractor::dense(std::span<const TokenId> state) const {
  std::vector<double> phi(static_cast<std::size_t>(dim()), 0.0);
  std::vector<int> idx;
  active_indices(state, idx);
  for (int i : idx) phi[static_cast<std::size_t>(i)] = 1.0;
  return phi;
}

void PolicyParams::validate() const {
  if (features.context_window < 1) throw ShapeError("context window must be >= 1");
  if (features.vocab_size < 2) throw ShapeError("vocabulary size must be >= 2");
  if (weights.rows() != features.dim() || weights.cols() != features.vocab_size) {
    throw ShapeError("policy weight shape does not match feature layout");
  }
  if (!weights.all_finite()) throw NumericalOverflowError("policy weights not finite");
}

void PolicyParams::save(const std::filesystem::path& path) const {
  save_matrix(path, weights, static_cast<std::uint64_t>(features.context_window));
}

PolicyParams PolicyParams::load(const std::filesystem::path& path) {
  LoadedMatrix loaded = load_matrix(path);
  PolicyParams p;
  p.features.context_window = static_cast<int>(loaded.aux);
  p.features.vocab_size = loaded.matrix.cols();
  p.weights = std::move(loaded.matrix);
  p.validate();
  return p;
}

void ValueParams::validate() const {
  if (features.context_window < 1) throw ShapeError("context window must be >= 1");
  if (features.vocab_size < 2) throw ShapeError("vocabulary size must be >= 2");
  if (static_cast<int>(weights.size()) != features.dim()) {
    throw ShapeError("value weight length does not match feature dimension");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw NumericalOverflowError("value weights not finite");
  }
}

void ValueParams::save(const std::filesystem::path& path) const {
  Matrix m(static_cast<int>(weights.size()), 1);
  std::copy(weights.begin(), weights.end(), m.data().begin());
  // aux packs context_window; vocab size reconstructs from dim = n*V + 1.
  save_matrix(path, m, static_cast<std::uint64_t>(features.context_window));
}

ValueParams ValueParams::load(const std::filesystem::path& path) {
  LoadedMatrix loaded = load_matrix(path);
  if (loaded.matrix.cols() != 1) throw ParseError("value parameter file must have one column");
  ValueParams p;
  p.features.context_window = static_cast<int>(loaded.aux);
  const int dim = loaded.matrix.rows();
  if (p.features.context_window < 1 || (dim - 1) % p.features.context_window != 0) {
    throw ParseError("value parameter header inconsistent with weight length");
  }
  p.features.vocab_size = (dim - 1) / p.features.context_window;
  p.weights = std::move(loaded.matrix.data());
  p.validate();
  return p;
}

namespace {

// Softmax over W^T phi(s) on top of the sparse active set.
std::vector<double> distribution_from_indices(const PolicyParams& params,
                                              const std::vector<int>& active) {
  const int vocab = params.features.vocab_size;
  std::vector<double> logits(static_cast<std::size_t>(vocab), 0.0);
  for (int f : active) {
    const double* row = params.weights.row(f);
    for (int v = 0; v < vocab; ++v) logits[static_cast<std::size_t>(v)] += row[v];
  }
  double max_logit = logits[0];
  for (double l : logits) {
    if (!std::isfinite(l)) throw NumericalOverflowError("non-finite logit in action distribution");
    max_logit = std::max(max_logit, l);
  }
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - max_logit);
    total += l;
  }
  for (double& l : logits) l /= total;
  return logits;
}

}  // namespace

std::vector<double> action_distribution(const PolicyParams& params,
                                        std::span<const TokenId> state) {
  std::vector<int> active;
  params.features.active_indices(state, active);
  return distribution_from_indices(params, active);
}

double log_prob(const PolicyParams& params, std::span<const TokenId> state, TokenId action) {
  if (action < 0 || action >= params.features.vocab_size) {
    throw InvalidTokenError("log_prob: action outside vocabulary");
  }
  const std::vector<double> dist = action_distribution(params, state);
  return std::log(dist[static_cast<std::size_t>(action)]);
}

double accumulate_logprob_grad(const PolicyParams& params, std::span<const TokenId> state,
                               TokenId action, double scale, Matrix& grad_accum) {
  if (action < 0 || action >= params.features.vocab_size) {
    throw InvalidTokenError("logprob grad: action outside vocabulary");
  }
  if (!grad_accum.same_shape(params.weights)) {
    throw ShapeError("gradient accumulator shape mismatch");
  }
  std::vector<int> active;
  params.features.active_indices(state, active);
  const std::vector<double> dist = distribution_from_indices(params, active);
  const int vocab = params.features.vocab_size;
  for (int f : active) {
    double* row = grad_accum.row(f);
    for (int v = 0; v < vocab; ++v) {
      row[v] += scale * ((v == action ? 1.0 : 0.0) - dist[static_cast<std::size_t>(v)]);
    }
  }
  return std::log(dist[static_cast<std::size_t>(action)]);
}

Matrix logprob_grad(const PolicyParams& params, std::span<const TokenId> state, TokenId action) {
  Matrix grad(params.weights.rows(), params.weights.cols());
  accumulate_logprob_grad(params, state, action, 1.0, grad);
  return grad;
}

double value_estimate(const ValueParams& params, std::span<const TokenId> state) {
  std::vector<int> active;
  params.features.active_indices(state, active);
  double v = 0.0;
  for (int f : active) v += params.weights[static_cast<std::size_t>(f)];
  return v;
}

void accumulate_value_grad(const ValueParams& params, std::span<const TokenId> state,
                           double scale, std::vector<double>& accum) {
  if (accum.size() != params.weights.size()) {
    throw ShapeError("value gradient accumulator length mismatch");
  }
  std::vector<int> active;
  params.features.active_indices(state, active);
  for (int f : active) accum[static_cast<std::size_t>(f)] += scale;
}

std::vector<double> value_grad(const ValueParams& params, std::span<const TokenId> state) {
  std::vector<double> grad(params.weights.size(), 0.0);
  accumulate_value_grad(params, state, 1.0, grad);
  return grad;
}

}  // namespace fgrlhf
