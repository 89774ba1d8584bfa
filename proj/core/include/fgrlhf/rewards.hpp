#pragma once

#include <functional>
#include <memory>
#include <set>
#include <span>
#include <vector>

#include "fgrlhf/episode.hpp"
#include "fgrlhf/segment.hpp"

namespace fgrlhf {

// Scores every segment of one output at a fixed density. Implementations
// are pure and safe to call concurrently.
class SegmentScorer {
 public:
  virtual ~SegmentScorer() = default;
  virtual std::vector<double> score(const Prompt& prompt, const std::vector<TokenId>& actions,
                                    const std::vector<Segment>& segments) const = 0;
};

// One reward source: category id k, segmentation density, combination
// weight w_k, and the scorer that produces R(x, y, j) per segment.
struct RewardSpec {
  int category = 0;
  Density density = Density::kSequence;
  double weight = 1.0;
  std::shared_ptr<const SegmentScorer> scorer;

  void validate() const;
};

// Per-generated-token rewards r_1..r_T for one output:
//
//   r_t = sum_k sum_j 1{t = end of segment j of category k} * w_k * R_k(x,y,j)
//         - beta * (log P_policy(a_t|s_t) - log P_init(a_t|s_t))
//
// The KL term lands on every token; segment rewards land on segment-final
// tokens only. All inputs are treated as constants. segment_rewards[k][j]
// must align with map.categories[k].segments[j]; a missing or extra score
// raises IncompleteRewardError.
std::vector<double> combine_token_rewards(const Episode& episode, const SegmentMap& map,
                                          const std::vector<RewardSpec>& specs,
                                          const std::vector<std::vector<double>>& segment_rewards,
                                          double beta);

// Segment map for one output under a reward spec list (densities taken in
// spec order).
SegmentMap build_segment_map(const std::vector<TokenId>& actions,
                             const std::vector<RewardSpec>& specs, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Detoxification oracles.

// Token-set toxicity: Tox(y) = (# toxic tokens in y) / max(1, len(y)).
// The empty output scores 0.
struct ToxicityOracle {
  std::set<TokenId> toxic_tokens;

  double toxicity(std::span<const TokenId> tokens) const;
};

// Sequence-level reward 1 - Tox(y), emitted at the final token.
double holistic_detox_reward(const std::vector<TokenId>& actions, const ToxicityOracle& oracle);

// Sentence j's reward is the drop in prefix toxicity when sentence j is
// appended: Tox(prefix through sentence j-1) - Tox(prefix through j).
// Rewards telescope: their sum is -Tox(y).
std::vector<double> sentence_detox_rewards(const std::vector<TokenId>& actions,
                                           const std::vector<Span>& sentences,
                                           const ToxicityOracle& oracle);

class HolisticDetoxScorer : public SegmentScorer {
 public:
  explicit HolisticDetoxScorer(ToxicityOracle oracle) : oracle_(std::move(oracle)) {}
  std::vector<double> score(const Prompt& prompt, const std::vector<TokenId>& actions,
                            const std::vector<Segment>& segments) const override;

 private:
  ToxicityOracle oracle_;
};

class SentenceDetoxScorer : public SegmentScorer {
 public:
  explicit SentenceDetoxScorer(ToxicityOracle oracle) : oracle_(std::move(oracle)) {}
  std::vector<double> score(const Prompt& prompt, const std::vector<TokenId>& actions,
                            const std::vector<Segment>& segments) const override;

 private:
  ToxicityOracle oracle_;
};

// ---------------------------------------------------------------------------
// Long-form QA oracles.

// Ground truth attached to one prompt: which tokens are on-topic, which
// factual tokens the passage supports, and which of those must be covered
// for a complete answer.
struct PromptSpec {
  int prompt_id = -1;
  int topic = -1;
  std::set<TokenId> relevant_tokens;
  std::set<TokenId> passage_facts;
  std::set<TokenId> required_units;

  // required_units must be a subset of passage_facts.
  void validate() const;
};

struct LfqaOracle {
  // Tokens that count as factual claims anywhere in the vocabulary.
  std::set<TokenId> fact_universe;
  // Delimiters and control tokens, exempt from relevance and repetition.
  std::set<TokenId> structural_tokens;

  // Sub-sentence rewards: +1 when every content token is on-topic and at
  // least one of them is new; a segment that only restates earlier content
  // is redundant and scores -1, as does mid-output delimiter spam. The
  // closing span around the stop token scores 0.
  std::vector<double> subsentence_rewards(const std::vector<TokenId>& actions,
                                          const std::vector<Span>& spans,
                                          const PromptSpec& spec) const;

  // Sentence rewards: +1 iff every fact-universe token in the sentence is
  // supported by the prompt's passage facts. A sentence without content
  // tokens makes no claim and scores 0.
  std::vector<double> sentence_rewards(const std::vector<TokenId>& actions,
                                       const std::vector<Span>& spans,
                                       const PromptSpec& spec) const;

  // Coverage of required units, in [0, 1]. Throws UndefinedScoreError when
  // the prompt requires no units.
  double completeness(const std::vector<TokenId>& actions, const PromptSpec& spec) const;
};

struct LfqaOracleRewards {
  std::vector<double> subsentence;  // one per sub-sentence
  std::vector<double> sentence;     // one per sentence
  double sequence = 0.0;            // completeness
};

// All three reward categories for one output, segmenting internally.
LfqaOracleRewards lfqa_oracle_rewards(const std::vector<TokenId>& actions,
                                      const Vocabulary& vocab, const LfqaOracle& oracle,
                                      const PromptSpec& spec);

// Resolves the PromptSpec for a prompt id; envs provide this.
using PromptSpecResolver = std::function<const PromptSpec*(int prompt_id)>;

// Oracle-backed scorer for one QA reward category.
class LfqaOracleScorer : public SegmentScorer {
 public:
  LfqaOracleScorer(const LfqaOracle* oracle, PromptSpecResolver resolver, Density density)
      : oracle_(oracle), resolver_(std::move(resolver)), density_(density) {}

  std::vector<double> score(const Prompt& prompt, const std::vector<TokenId>& actions,
                            const std::vector<Segment>& segments) const override;

 private:
  const LfqaOracle* oracle_;
  PromptSpecResolver resolver_;
  Density density_;
};

}  // namespace fgrlhf
