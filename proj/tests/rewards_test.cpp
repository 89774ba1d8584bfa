#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "fgrlhf/annotation.hpp"
#include "fgrlhf/errors.hpp"
#include "fgrlhf/rewards.hpp"
#include "fgrlhf/rng.hpp"
#include "fgrlhf/segment.hpp"

using namespace fgrlhf;

namespace {

Vocabulary tiny_vocab() {
  Vocabulary v;
  v.tokens = {"<bos>", "<eos>", ".", ",", "w0", "w1", "w2", "w3"};
  v.bos = 0;
  v.eos = 1;
  v.sentence_delim = 2;
  v.subsentence_delims = {3};
  return v;
}

Episode episode_of(std::vector<TokenId> actions) {
  Episode ep;
  ep.actions = std::move(actions);
  ep.logp_policy.assign(ep.actions.size(), -1.0);
  ep.logp_init.assign(ep.actions.size(), -1.0);
  return ep;
}

RewardSpec spec_of(int category, Density density, double weight) {
  RewardSpec s;
  s.category = category;
  s.density = density;
  s.weight = weight;
  return s;
}

SegmentMap map_of(std::vector<CategorySegments> cats) {
  SegmentMap m;
  m.categories = std::move(cats);
  return m;
}

}  // namespace

TEST_CASE("a single sequence reward lands on the final token") {
  Episode ep = episode_of({4, 5, 6});
  const SegmentMap map = map_of({{Density::kSequence, {Segment{1, 1, 3}}}});
  const std::vector<RewardSpec> specs{spec_of(1, Density::kSequence, 1.0)};
  const std::vector<double> r = combine_token_rewards(ep, map, specs, {{0.5}}, 0.0);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("two categories stack their weighted rewards at segment ends") {
  Episode ep = episode_of({4, 5, 6, 7});
  const SegmentMap map = map_of({
      {Density::kSentence, {Segment{1, 1, 2}, Segment{2, 3, 4}}},
      {Density::kSequence, {Segment{1, 1, 4}}},
  });
  const std::vector<RewardSpec> specs{spec_of(1, Density::kSentence, 0.3),
                                      spec_of(2, Density::kSequence, 0.5)};
  const std::vector<double> r =
      combine_token_rewards(ep, map, specs, {{1.0, -1.0}, {0.8}}, 0.0);
  REQUIRE(r.size() == 4);
  CHECK(r[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(r[2] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r[3] == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("the divergence penalty applies at every token") {
  Episode ep = episode_of({4});
  ep.logp_policy = {-1.0};
  ep.logp_init = {-2.0};
  const std::vector<double> r = combine_token_rewards(ep, SegmentMap{}, {}, {}, 0.1);
  REQUIRE(r.size() == 1);
  CHECK(r[0] == doctest::Approx(-0.1).epsilon(1e-12));
}

TEST_CASE("penalty vanishes when the policy matches its reference") {
  Episode ep = episode_of({4, 5, 6});
  const std::vector<double> r = combine_token_rewards(ep, SegmentMap{}, {}, {}, 10.0);
  for (double x : r) CHECK(x == 0.0);
}

TEST_CASE("missing segment scores are rejected") {
  Episode ep = episode_of({4, 5, 6});
  const SegmentMap map = map_of({{Density::kSentence, {Segment{1, 1, 2}, Segment{2, 3, 3}}}});
  const std::vector<RewardSpec> specs{spec_of(1, Density::kSentence, 1.0)};
  CHECK_THROWS_AS(combine_token_rewards(ep, map, specs, {{1.0}}, 0.0),
                  IncompleteRewardError);
  CHECK_THROWS_AS(combine_token_rewards(ep, map, specs, {}, 0.0), IncompleteRewardError);
}

TEST_CASE("scaling a category weight scales its contribution linearly") {
  RngStream rng(3);
  const Vocabulary v = tiny_vocab();
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<TokenId> actions;
    const int len = rng.uniform_int(2, 20);
    for (int i = 0; i < len; ++i) actions.push_back(rng.uniform_int(2, v.size() - 1));
    Episode ep = episode_of(actions);
    std::vector<RewardSpec> specs{spec_of(1, Density::kSentence, 0.4),
                                  spec_of(2, Density::kSequence, 0.7)};
    const SegmentMap map = build_segment_map(
        actions, std::vector<Density>{Density::kSentence, Density::kSequence}, v);
    std::vector<std::vector<double>> scores(2);
    for (const Segment& s : map.categories[0].segments) {
      (void)s;
      scores[0].push_back(rng.normal());
    }
    scores[1].push_back(rng.normal());

    const std::vector<double> base = combine_token_rewards(ep, map, specs, scores, 0.0);
    const double c = 2.5;
    specs[0].weight *= c;
    const std::vector<double> scaled = combine_token_rewards(ep, map, specs, scores, 0.0);
    // Difference comes only from category 1, so new = base + (c-1) * cat1 part.
    std::vector<RewardSpec> only_first{spec_of(1, Density::kSentence, 0.4)};
    const SegmentMap first_map = map_of({map.categories[0]});
    const std::vector<double> cat1 =
        combine_token_rewards(ep, first_map, only_first, {scores[0]}, 0.0);
    for (std::size_t t = 0; t < base.size(); ++t) {
      CHECK(scaled[t] == doctest::Approx(base[t] + (c - 1.0) * cat1[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("toxicity is the toxic-token fraction") {
  ToxicityOracle oracle;
  oracle.toxic_tokens = {6, 7};
  const std::vector<TokenId> clean{4, 5, 4};
  CHECK(oracle.toxicity(clean) == 0.0);
  const std::vector<TokenId> all{6, 7, 6};
  CHECK(oracle.toxicity(all) == 1.0);
  const std::vector<TokenId> quarter{4, 6, 5, 4};
  CHECK(oracle.toxicity(quarter) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(oracle.toxicity(std::vector<TokenId>{}) == 0.0);
}

TEST_CASE("whole-output detox reward is one minus toxicity") {
  ToxicityOracle oracle;
  oracle.toxic_tokens = {6};
  CHECK(holistic_detox_reward({4, 5, 4}, oracle) == 1.0);
  CHECK(holistic_detox_reward({6, 6}, oracle) == 0.0);
  CHECK(holistic_detox_reward({4, 6, 5, 4}, oracle) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("per-sentence detox rewards are prefix toxicity drops") {
  const Vocabulary v = tiny_vocab();
  ToxicityOracle oracle;
  oracle.toxic_tokens = {6};
  // clean toxic delim | clean delim
  const std::vector<TokenId> actions{4, 6, 2, 5, 2};
  const std::vector<Span> sentences = segment(actions, Density::kSentence, v);
  REQUIRE(sentences.size() == 2);
  const std::vector<double> r = sentence_detox_rewards(actions, sentences, oracle);
  REQUIRE(r.size() == 2);
  CHECK(r[0] == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(r[1] == doctest::Approx(2.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("clean outputs earn zero sentence rewards") {
  const Vocabulary v = tiny_vocab();
  ToxicityOracle oracle;
  oracle.toxic_tokens = {6};
  const std::vector<TokenId> actions{4, 5, 2, 4, 2};
  for (double r : sentence_detox_rewards(actions, segment(actions, Density::kSentence, v),
                                         oracle)) {
    CHECK(r == 0.0);
  }
}

TEST_CASE("sentence rewards telescope to minus the output toxicity") {
  const Vocabulary v = tiny_vocab();
  ToxicityOracle oracle;
  oracle.toxic_tokens = {6, 7};
  RngStream rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TokenId> actions;
    const int len = rng.uniform_int(1, 30);
    for (int i = 0; i < len; ++i) actions.push_back(rng.uniform_int(2, v.size() - 1));
    const std::vector<Span> sentences = segment(actions, Density::kSentence, v);
    const std::vector<double> r = sentence_detox_rewards(actions, sentences, oracle);
    double total = 0.0;
    for (double x : r) total += x;
    // The running-sum pinning makes the identity hold in machine arithmetic,
    // not just up to rounding.
    CHECK(total == -oracle.toxicity(actions));
  }
}

namespace {

// Vocab: 0 bos, 1 eos, 2 '.', 3 ',', 4..11 content tokens.
Vocabulary qa_vocab() {
  Vocabulary v;
  v.tokens = {"<bos>", "<eos>", ".", ",", "f0", "f1", "f2", "f3", "c0", "c1", "c2", "x0"};
  v.bos = 0;
  v.eos = 1;
  v.sentence_delim = 2;
  v.subsentence_delims = {3};
  return v;
}

LfqaOracle qa_oracle() {
  LfqaOracle o;
  o.fact_universe = {4, 5, 6, 7};
  o.structural_tokens = {0, 1, 2, 3};
  return o;
}

PromptSpec qa_spec() {
  PromptSpec s;
  s.prompt_id = 0;
  s.topic = 0;
  s.relevant_tokens = {4, 5, 6, 7, 8, 9, 10};
  s.passage_facts = {4, 5, 6, 7};
  s.required_units = {4, 5, 6, 7};
  return s;
}

}  // namespace

TEST_CASE("a perfect answer scores +1 everywhere with full coverage") {
  const Vocabulary v = qa_vocab();
  const LfqaOracle oracle = qa_oracle();
  const PromptSpec spec = qa_spec();
  // f0 c0 . f1 , f2 . f3 <eos>
  const std::vector<TokenId> actions{4, 8, 2, 5, 3, 6, 2, 7, 1};
  const LfqaOracleRewards r = lfqa_oracle_rewards(actions, v, oracle, spec);
  for (double x : r.subsentence) CHECK(x == 1.0);
  for (double x : r.sentence) CHECK(x == 1.0);
  CHECK(r.sequence == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("irrelevant tokens poison their sub-sentence") {
  const Vocabulary v = qa_vocab();
  const LfqaOracle oracle = qa_oracle();
  const PromptSpec spec = qa_spec();
  // f0 x0 . f1 .   (x0 = token 11 is off-topic)
  const std::vector<TokenId> actions{4, 11, 2, 5, 2};
  const LfqaOracleRewards r = lfqa_oracle_rewards(actions, v, oracle, spec);
  REQUIRE(r.subsentence.size() == 2);
  CHECK(r.subsentence[0] == -1.0);
  CHECK(r.subsentence[1] == 1.0);
}

TEST_CASE("a repeated sub-sentence is penalized on its second occurrence") {
  const Vocabulary v = qa_vocab();
  const LfqaOracle oracle = qa_oracle();
  const PromptSpec spec = qa_spec();
  // f0 c0 . f0 c0 .
  const std::vector<TokenId> actions{4, 8, 2, 4, 8, 2};
  const LfqaOracleRewards r = lfqa_oracle_rewards(actions, v, oracle, spec);
  REQUIRE(r.subsentence.size() == 2);
  CHECK(r.subsentence[0] == 1.0);
  CHECK(r.subsentence[1] == -1.0);
}

TEST_CASE("restating earlier content in a new order is still redundant") {
  const Vocabulary v = qa_vocab();
  const LfqaOracle oracle = qa_oracle();
  const PromptSpec spec = qa_spec();
  // f0 c0 . c0 f0 . f1 c0 .   (last one brings f1, which is new)
  const std::vector<TokenId> actions{4, 8, 2, 8, 4, 2, 5, 8, 2};
  const LfqaOracleRewards r = lfqa_oracle_rewards(actions, v, oracle, spec);
  REQUIRE(r.subsentence.size() == 3);
  CHECK(r.subsentence[0] == 1.0);
  CHECK(r.subsentence[1] == -1.0);
  CHECK(r.subsentence[2] == 1.0);
}

TEST_CASE("delimiter spam is redundant but the closing span is not judged") {
  const Vocabulary v = qa_vocab();
  const LfqaOracle oracle = qa_oracle();
  const PromptSpec spec = qa_spec();
  // f0 , , f1 . <eos>: the middle span is empty spam, the trailing span
  // holds only the stop token.
  const std::vector<TokenId> actions{4, 3, 3, 5, 2, 1};
  const LfqaOracleRewards r = lfqa_oracle_rewards(actions, v, oracle, spec);
  REQUIRE(r.subsentence.size() == 4);
  CHECK(r.subsentence[0] == 1.0);
  CHECK(r.subsentence[1] == -1.0);
  CHECK(r.subsentence[2] == 1.0);
  CHECK(r.subsentence[3] == 0.0);
  REQUIRE(r.sentence.size() == 2);
  CHECK(r.sentence[0] == 1.0);
  CHECK(r.sentence[1] == 0.0);
}

TEST_CASE("unsupported facts poison their sentence") {
  const Vocabulary v = qa_vocab();
  LfqaOracle oracle = qa_oracle();
  PromptSpec spec = qa_spec();
  spec.passage_facts = {4, 5};  // f2 (6) is a fact but unsupported here
  spec.required_units = {4, 5};
  // f0 . f2 .
  const std::vector<TokenId> actions{4, 2, 6, 2};
  const LfqaOracleRewards r = lfqa_oracle_rewards(actions, v, oracle, spec);
  REQUIRE(r.sentence.size() == 2);
  CHECK(r.sentence[0] == 1.0);
  CHECK(r.sentence[1] == -1.0);
}

TEST_CASE("coverage is the fraction of required units mentioned") {
  const Vocabulary v = qa_vocab();
  const LfqaOracle oracle = qa_oracle();
  const PromptSpec spec = qa_spec();  // 4 required units
  const std::vector<TokenId> actions{4, 5, 2};
  CHECK(oracle.completeness(actions, spec) == doctest::Approx(0.5).epsilon(1e-15));
  (void)v;
}

TEST_CASE("coverage is undefined without required units") {
  const LfqaOracle oracle = qa_oracle();
  PromptSpec spec = qa_spec();
  spec.required_units.clear();
  CHECK_THROWS_AS(oracle.completeness({4, 5}, spec), UndefinedScoreError);
}

TEST_CASE("prompt specs require units to come from the passage") {
  PromptSpec spec = qa_spec();
  CHECK_NOTHROW(spec.validate());
  spec.required_units.insert(11);
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("annotation spans obey the category restrictions") {
  FeedbackAnnotation ann;
  ann.prompt_id = 0;
  ann.output = {4, 5, 2, 6, 2};
  ann.spans = {{1, 1, 2}, {2, 4, 5}};
  CHECK_NOTHROW(ann.validate());

  // Category 1 and 2 spans may not overlap.
  FeedbackAnnotation bad = ann;
  bad.spans = {{1, 1, 3}, {2, 3, 5}};
  CHECK_THROWS_AS(bad.validate(), AnnotationError);

  // Whole-output restriction for category 3.
  FeedbackAnnotation c3 = ann;
  c3.spans = {{3, 1, 5}};
  CHECK_NOTHROW(c3.validate());
  c3.spans = {{3, 2, 5}};
  CHECK_THROWS_AS(c3.validate(), AnnotationError);

  // Spans must sit inside the output.
  FeedbackAnnotation out = ann;
  out.spans = {{1, 4, 6}};
  CHECK_THROWS_AS(out.validate(), AnnotationError);
}

TEST_CASE("label derivation marks overlapped segments as errors") {
  FeedbackAnnotation ann;
  ann.prompt_id = 0;
  ann.output = {4, 5, 6, 7, 8, 9};
  ann.spans = {{1, 3, 5}};
  const std::vector<Segment> segments{Segment{1, 1, 3}, Segment{2, 4, 6}};
  const std::vector<SegmentLabel> labels = derive_segment_labels(ann, segments, 1);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0] == SegmentLabel::kHasError);
  CHECK(labels[1] == SegmentLabel::kHasError);
}

TEST_CASE("unannotated outputs derive all-clear labels") {
  FeedbackAnnotation ann;
  ann.prompt_id = 0;
  ann.output = {4, 5, 6};
  const std::vector<Segment> segments{Segment{1, 1, 2}, Segment{2, 3, 3}};
  for (SegmentLabel l : derive_segment_labels(ann, segments, 1)) {
    CHECK(l == SegmentLabel::kNoError);
  }
  for (SegmentLabel l : derive_segment_labels(ann, segments, 2)) {
    CHECK(l == SegmentLabel::kNoError);
  }
}

TEST_CASE("category-1 spans exclude their sentence from category-2 loss") {
  FeedbackAnnotation ann;
  ann.prompt_id = 0;
  ann.output = {4, 5, 2, 6, 7, 2};
  ann.spans = {{1, 1, 2}};  // inside sentence 1 only
  const std::vector<Segment> sentences{Segment{1, 1, 3}, Segment{2, 4, 6}};
  const std::vector<SegmentLabel> labels = derive_segment_labels(ann, sentences, 2);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0] == SegmentLabel::kExcluded);
  CHECK(labels[1] == SegmentLabel::kNoError);

  // A sentence with its own category-2 span stays in the loss.
  ann.spans = {{1, 1, 2}, {2, 4, 5}};
  const std::vector<SegmentLabel> both = derive_segment_labels(ann, sentences, 2);
  CHECK(both[0] == SegmentLabel::kExcluded);
  CHECK(both[1] == SegmentLabel::kHasError);
}

TEST_CASE("annotations round-trip through the line format") {
  std::vector<FeedbackAnnotation> anns(2);
  anns[0].prompt_id = 3;
  anns[0].output = {4, 5, 2, 1};
  anns[0].spans = {{1, 1, 2}, {3, 1, 4}};
  anns[1].prompt_id = 9;
  anns[1].output = {6};
  const auto path = std::filesystem::temp_directory_path() / "fgrlhf_ann_rt.tsv";
  save_annotations(path, anns);
  const std::vector<FeedbackAnnotation> back = load_annotations(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].prompt_id == 3);
  CHECK(back[0].output == anns[0].output);
  REQUIRE(back[0].spans.size() == 2);
  CHECK(back[0].spans[0].category == 1);
  CHECK(back[0].spans[0].begin == 1);
  CHECK(back[0].spans[0].end == 2);
  CHECK(back[1].prompt_id == 9);
  CHECK(back[1].spans.empty());
  std::filesystem::remove(path);
}
