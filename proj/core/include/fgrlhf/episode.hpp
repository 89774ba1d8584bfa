#pragma once

#include <vector>

#include "fgrlhf/vocab.hpp"

namespace fgrlhf {

// Conditioning context x_1..x_l. `id` indexes the owning environment's
// prompt table so per-prompt metadata (specs, provocation) can be looked up.
struct Prompt {
  std::vector<TokenId> tokens;
  int id = -1;
};

// One generated output y = a_1..a_T plus everything the updates need.
// logp_policy holds log P(a_t | s_t) under the policy that sampled the
// episode; logp_init holds the same under the frozen initial policy. Both
// are recorded at sampling time and treated as constants afterwards.
struct Episode {
  Prompt prompt;
  std::vector<TokenId> actions;
  std::vector<double> logp_policy;
  std::vector<double> logp_init;
  std::vector<double> rewards;  // filled by reward combination
  bool terminated_by_eos = false;

  int length() const { return static_cast<int>(actions.size()); }
};

}  // namespace fgrlhf
