#pragma once

#include <span>
#include <vector>

#include "fgrlhf/vocab.hpp"

namespace fgrlhf {

// Deterministic transition of the token-level MDP: the next state is the
// current state with `action` appended. Throws InvalidTokenError if the
// action is outside [0, vocab_size).
std::vector<TokenId> transition(std::span<const TokenId> state, TokenId action, int vocab_size);

// Appending variant used by rollouts to avoid copies.
void transition_in_place(std::vector<TokenId>& state, TokenId action, int vocab_size);

// True iff generation must stop: the last generated action was eos, or the
// number of generated tokens t has reached t_max. `t` counts generated
// tokens only, not prompt tokens.
bool is_terminal(std::span<const TokenId> generated, int t, int t_max, TokenId eos);

}  // namespace fgrlhf
