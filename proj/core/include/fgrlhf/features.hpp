#pragma once

#include <span>
#include <vector>

#include "fgrlhf/vocab.hpp"

namespace fgrlhf {

// State featurization for the linear policy and value head: one-hot blocks
// for the last n tokens of the state (most recent first) followed by a
// constant bias feature. Block i covers feature indices [i*V, (i+1)*V) and
// is all zero when the state has fewer than i+1 tokens. Every feature is
// 0 or 1 and at most n+1 are active, so gradients stay sparse.
struct FeatureExtractor {
  int context_window = 0;  // n
  int vocab_size = 0;      // V

  int dim() const { return context_window * vocab_size + 1; }
  int bias_index() const { return dim() - 1; }

  // Active feature indices for `state`, bias always included.
  void active_indices(std::span<const TokenId> state, std::vector<int>& out) const;

  std::vector<int> active_indices(std::span<const TokenId> state) const {
    std::vector<int> out;
    active_indices(state, out);
    return out;
  }

  // Dense 0/1 vector of length dim(). Test and oracle use.
  std::vector<double> dense(std::span<const TokenId> state) const;
};

}  // namespace fgrlhf
