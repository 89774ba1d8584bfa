#include "fgrlhf/rewards.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

void RewardSpec::validate() const {
  if (!scorer) throw ConfigError("reward spec has no scorer");
  if (!std::isfinite(weight)) throw ConfigError("reward weight must be finite");
}

std::vector<double> combine_token_rewards(const Episode& episode, const SegmentMap& map,
                                          const std::vector<RewardSpec>& specs,
                                          const std::vector<std::vector<double>>& segment_rewards,
                                          double beta) {
  const int total = episode.length();
  if (map.categories.size() != specs.size()) {
    throw ShapeError("segment map category count does not match reward specs");
  }
  if (segment_rewards.size() != specs.size()) {
    throw IncompleteRewardError("segment reward list count does not match reward specs");
  }
  if (static_cast<int>(episode.logp_policy.size()) != total ||
      static_cast<int>(episode.logp_init.size()) != total) {
    throw ShapeError("episode log-probs not populated for every generated token");
  }

  std::vector<double> rewards(static_cast<std::size_t>(total), 0.0);
  for (int t = 0; t < total; ++t) {
    rewards[static_cast<std::size_t>(t)] =
        -beta * (episode.logp_policy[static_cast<std::size_t>(t)] -
                 episode.logp_init[static_cast<std::size_t>(t)]);
  }

  for (std::size_t k = 0; k < specs.size(); ++k) {
    const CategorySegments& cat = map.categories[k];
    if (cat.density != specs[k].density) {
      throw ShapeError("segment map density disagrees with reward spec " + std::to_string(k));
    }
    if (segment_rewards[k].size() != cat.segments.size()) {
      throw IncompleteRewardError("category " + std::to_string(specs[k].category) + " has " +
                                  std::to_string(segment_rewards[k].size()) + " scores for " +
                                  std::to_string(cat.segments.size()) + " segments");
    }
    for (std::size_t j = 0; j < cat.segments.size(); ++j) {
      const int end = cat.segments[j].end;
      if (end < 1 || end > total) throw ShapeError("segment end outside output");
      rewards[static_cast<std::size_t>(end - 1)] += specs[k].weight * segment_rewards[k][j];
    }
  }
  return rewards;
}

SegmentMap build_segment_map(const std::vector<TokenId>& actions,
                             const std::vector<RewardSpec>& specs, const Vocabulary& vocab) {
  std::vector<Density> densities;
  densities.reserve(specs.size());
  for (const RewardSpec& s : specs) densities.push_back(s.density);
  return build_segment_map(actions, densities, vocab);
}

double ToxicityOracle::toxicity(std::span<const TokenId> tokens) const {
  int toxic = 0;
  for (TokenId t : tokens) {
    if (toxic_tokens.count(t)) ++toxic;
  }
  return static_cast<double>(toxic) /
         static_cast<double>(std::max<std::size_t>(1, tokens.size()));
}

double holistic_detox_reward(const std::vector<TokenId>& actions, const ToxicityOracle& oracle) {
  return 1.0 - oracle.toxicity(actions);
}

namespace {

// Nearest r to target - sum with sum + r == target after rounding, if one
// exists within a few ulp; otherwise the closest miss. Exact landings can
// be unreachable: when target - sum falls on a rounding tie, both
// candidate parities round the sum to the even neighbors of an odd target.
double pin_step(double sum, double target, bool* hit) {
  double best = target - sum;
  double best_gap = std::abs((sum + best) - target);
  double r = best;
  for (int step = 0; step < 4 && best_gap != 0.0; ++step) {
    const double landed = sum + r;
    if (landed == target) break;
    r = std::nextafter(r, landed < target ? std::numeric_limits<double>::infinity()
                                          : -std::numeric_limits<double>::infinity());
    const double gap = std::abs((sum + r) - target);
    if (gap < best_gap) {
      best = r;
      best_gap = gap;
    }
  }
  *hit = best_gap == 0.0;
  return best;
}

}  // namespace

std::vector<double> sentence_detox_rewards(const std::vector<TokenId>& actions,
                                           const std::vector<Span>& sentences,
                                           const ToxicityOracle& oracle) {
  // Rewards telescope: the running sum is held at -Tox(prefix) in machine
  // arithmetic, so the rewards add up to exactly -Tox(full output). Each
  // reward is the rounded prefix-toxicity drop, corrected by at most a few
  // ulp to absorb rounding drift. When the final landing is blocked by a
  // rounding tie, an earlier reward is nudged one ulp to shift the parity.
  std::vector<double> rewards;
  rewards.reserve(sentences.size());
  std::vector<double> targets;
  targets.reserve(sentences.size());
  for (const Span& s : sentences) {
    if (s.end < 1 || s.end > static_cast<int>(actions.size())) {
      throw ShapeError("sentence span outside output");
    }
    targets.push_back(-oracle.toxicity(
        std::span<const TokenId>(actions.data(), static_cast<std::size_t>(s.end))));
  }

  double sum = 0.0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    bool hit = false;
    double r = pin_step(sum, targets[j], &hit);
    if (!hit && j + 1 == targets.size()) {
      for (std::size_t back = j; back > 0 && !hit; --back) {
        const std::size_t m = back - 1;
        for (int k : {-1, 1, -2, 2}) {
          std::vector<double> trial = rewards;
          double& knob = trial[m];
          for (int step = 0; step < std::abs(k); ++step) {
            knob = std::nextafter(knob, k < 0 ? -std::numeric_limits<double>::infinity()
                                              : std::numeric_limits<double>::infinity());
          }
          double trial_sum = 0.0;
          for (double x : trial) trial_sum += x;
          bool trial_hit = false;
          const double trial_r = pin_step(trial_sum, targets[j], &trial_hit);
          if (trial_hit) {
            rewards = std::move(trial);
            sum = trial_sum;
            r = trial_r;
            hit = true;
            break;
          }
        }
      }
    }
    rewards.push_back(r);
    sum += r;
  }
  return rewards;
}

std::vector<double> HolisticDetoxScorer::score(const Prompt&, const std::vector<TokenId>& actions,
                                               const std::vector<Segment>& segments) const {
  std::vector<double> out;
  out.reserve(segments.size());
  for (const Segment& s : segments) {
    (void)s;
    out.push_back(holistic_detox_reward(actions, oracle_));
  }
  return out;
}

std::vector<double> SentenceDetoxScorer::score(const Prompt&, const std::vector<TokenId>& actions,
                                               const std::vector<Segment>& segments) const {
  std::vector<Span> spans;
  spans.reserve(segments.size());
  for (const Segment& s : segments) spans.push_back(s.span());
  return sentence_detox_rewards(actions, spans, oracle_);
}

void PromptSpec::validate() const {
  for (TokenId u : required_units) {
    if (!passage_facts.count(u)) {
      throw ConfigError("required unit " + std::to_string(u) + " not among passage facts");
    }
  }
}

namespace {

// Content tokens of a span: everything the oracle does not treat as
// structural. Used for both relevance and repetition.
std::vector<TokenId> content_tokens(const std::vector<TokenId>& actions, const Span& span,
                                    const std::set<TokenId>& structural) {
  std::vector<TokenId> content;
  for (int t = span.begin; t <= span.end; ++t) {
    const TokenId tok = actions[static_cast<std::size_t>(t - 1)];
    if (!structural.count(tok)) content.push_back(tok);
  }
  return content;
}

}  // namespace

std::vector<double> LfqaOracle::subsentence_rewards(const std::vector<TokenId>& actions,
                                                    const std::vector<Span>& spans,
                                                    const PromptSpec& spec) const {
  std::vector<double> rewards;
  rewards.reserve(spans.size());
  std::set<TokenId> stated;
  for (const Span& span : spans) {
    const std::vector<TokenId> content = content_tokens(actions, span, structural_tokens);
    if (content.empty()) {
      // The closing span around the stop token is not an utterance; empty
      // spans anywhere else are delimiter spam.
      rewards.push_back(span.end == static_cast<int>(actions.size()) ? 0.0 : -1.0);
      continue;
    }
    bool on_topic = true;
    bool novel = false;
    for (TokenId tok : content) {
      if (!spec.relevant_tokens.count(tok)) on_topic = false;
      if (!stated.count(tok)) novel = true;
    }
    stated.insert(content.begin(), content.end());
    rewards.push_back(on_topic && novel ? 1.0 : -1.0);
  }
  return rewards;
}

std::vector<double> LfqaOracle::sentence_rewards(const std::vector<TokenId>& actions,
                                                 const std::vector<Span>& spans,
                                                 const PromptSpec& spec) const {
  std::vector<double> rewards;
  rewards.reserve(spans.size());
  for (const Span& span : spans) {
    // A sentence with no content tokens makes no claim to judge.
    if (content_tokens(actions, span, structural_tokens).empty()) {
      rewards.push_back(0.0);
      continue;
    }
    bool grounded = true;
    for (int t = span.begin; t <= span.end; ++t) {
      const TokenId tok = actions[static_cast<std::size_t>(t - 1)];
      if (fact_universe.count(tok) && !spec.passage_facts.count(tok)) {
        grounded = false;
        break;
      }
    }
    rewards.push_back(grounded ? 1.0 : -1.0);
  }
  return rewards;
}

double LfqaOracle::completeness(const std::vector<TokenId>& actions,
                                const PromptSpec& spec) const {
  if (spec.required_units.empty()) {
    throw UndefinedScoreError("completeness undefined: prompt requires no units");
  }
  std::set<TokenId> covered;
  for (TokenId tok : actions) {
    if (spec.required_units.count(tok)) covered.insert(tok);
  }
  return static_cast<double>(covered.size()) / static_cast<double>(spec.required_units.size());
}

LfqaOracleRewards lfqa_oracle_rewards(const std::vector<TokenId>& actions,
                                      const Vocabulary& vocab, const LfqaOracle& oracle,
                                      const PromptSpec& spec) {
  LfqaOracleRewards out;
  out.subsentence =
      oracle.subsentence_rewards(actions, segment(actions, Density::kSubsentence, vocab), spec);
  out.sentence =
      oracle.sentence_rewards(actions, segment(actions, Density::kSentence, vocab), spec);
  out.sequence = oracle.completeness(actions, spec);
  return out;
}

std::vector<double> LfqaOracleScorer::score(const Prompt& prompt,
                                            const std::vector<TokenId>& actions,
                                            const std::vector<Segment>& segments) const {
  const PromptSpec* spec = resolver_(prompt.id);
  if (spec == nullptr) {
    throw ConfigError("no prompt spec for prompt id " + std::to_string(prompt.id));
  }
  std::vector<Span> spans;
  spans.reserve(segments.size());
  for (const Segment& s : segments) spans.push_back(s.span());
  switch (density_) {
    case Density::kSubsentence:
      return oracle_->subsentence_rewards(actions, spans, *spec);
    case Density::kSentence:
      return oracle_->sentence_rewards(actions, spans, *spec);
    case Density::kSequence: {
      std::vector<double> out;
      out.reserve(spans.size());
      for (const Span& s : spans) {
        (void)s;
        out.push_back(oracle_->completeness(actions, *spec));
      }
      return out;
    }
  }
  return {};
}

}  // namespace fgrlhf
