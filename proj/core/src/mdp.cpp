#include "fgrlhf/mdp.hpp"

#include <string>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

std::vector<TokenId> transition(std::span<const TokenId> state, TokenId action, int vocab_size) {
  std::vector<TokenId> next(state.begin(), state.end());
  transition_in_place(next, action, vocab_size);
  return next;
}

void transition_in_place(std::vector<TokenId>& state, TokenId action, int vocab_size) {
  if (action < 0 || action >= vocab_size) {
    throw InvalidTokenError("transition: action " + std::to_string(action) +
                            " outside vocabulary of size " + std::to_string(vocab_size));
  }
  state.push_back(action);
}

bool is_terminal(std::span<const TokenId> generated, int t, int t_max, TokenId eos) {
  if (!generated.empty() && generated.back() == eos) return true;
  return t >= t_max;
}

}  // namespace fgrlhf
