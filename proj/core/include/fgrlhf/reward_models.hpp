#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "fgrlhf/annotation.hpp"
#include "fgrlhf/matrix.hpp"
#include "fgrlhf/rewards.hpp"
#include "fgrlhf/segment.hpp"

namespace fgrlhf {

// Features for segment classifiers: token-presence indicators over the
// segment's tokens, the segment's normalized start position, and a bias.
struct SegmentFeatureExtractor {
  int vocab_size = 0;

  int dim() const { return vocab_size + 2; }
  std::vector<double> extract(const std::vector<TokenId>& actions, const Span& span) const;
};

// Features for sequence-level scalar rewards: token-presence indicators
// over the whole output plus a bias.
struct SequenceFeatureExtractor {
  int vocab_size = 0;

  int dim() const { return vocab_size + 1; }
  std::vector<double> extract(const std::vector<TokenId>& actions) const;
};

// Two-class linear segment classifier. Column 0 scores "no error",
// column 1 scores "has error"; prediction is the larger logit with ties
// resolved as "no error".
struct ClassifierRM {
  int category = 0;
  Density density = Density::kSequence;
  SegmentFeatureExtractor features;
  Matrix weights;  // dim x 2

  double error_probability(const std::vector<double>& phi) const;
  bool predicts_no_error(const std::vector<double>& phi) const;

  void save(const std::filesystem::path& path) const;
  static ClassifierRM load(const std::filesystem::path& path);
};

// Linear scalar reward head trained from preference pairs.
struct ScalarRM {
  SequenceFeatureExtractor features;
  std::vector<double> weights;

  double score(const std::vector<TokenId>& actions) const;

  void save(const std::filesystem::path& path) const;
  static ScalarRM load(const std::filesystem::path& path);
};

// RM reward for one segment: +1 when the classifier predicts no error,
// -1 otherwise.
double learned_rm_segment_reward(const ClassifierRM& model, const std::vector<TokenId>& actions,
                                 const Segment& segment);

// Sequence-level variant: the scalar head's score.
double learned_rm_segment_reward(const ScalarRM& model, const std::vector<TokenId>& actions);

// Stable pairwise preference loss: log(1 + exp(-(score_preferred -
// score_other))). Equal scores give ln 2; the loss depends only on the
// score difference.
double pairwise_loss(double score_preferred, double score_other);

// One training example for a classifier: extracted features plus label.
struct LabeledSegment {
  std::vector<double> features;
  SegmentLabel label = SegmentLabel::kNoError;
};

struct RmTrainOptions {
  double step_size = 0.5;
  int max_epochs = 2000;
  double holdout_fraction = 0.2;
  int patience = 50;  // epochs without held-out improvement before stopping
  std::uint64_t seed = 0;
};

struct RmTrainReport {
  std::vector<double> train_loss;  // per epoch, in run order
  double best_holdout_loss = 0.0;
  double holdout_accuracy = 0.0;  // classifier: label accuracy; scalar: pair accuracy
  int best_epoch = 0;
  int train_count = 0;
  int holdout_count = 0;
  int excluded_count = 0;
  // All usable labels were identical; the classifier degenerates to a
  // constant and the caller is warned.
  bool single_class = false;
};

// Full-batch gradient descent on mean cross-entropy with a fixed step,
// deterministic held-out split, and early stopping on held-out loss.
// Excluded segments carry zero loss weight. Returns the weights from the
// best held-out epoch.
ClassifierRM train_classifier_rm(const std::vector<LabeledSegment>& data,
                                 const SegmentFeatureExtractor& features, int category,
                                 Density density, const RmTrainOptions& options,
                                 RmTrainReport* report = nullptr);

// Preference pair: y_p preferred over y_other for the same prompt.
struct ComparisonPair {
  int prompt_id = -1;
  std::vector<TokenId> preferred;
  std::vector<TokenId> other;
};

// Preference pairs from sampled outputs for one prompt, scored by coverage
// of gold info units: score(y) = |units(y) ∩ gold| / |gold|. Every
// unordered sample pair contributes unless the scores tie. Throws
// UndefinedScoreError when gold_units is empty.
std::vector<ComparisonPair> bootstrap_completeness_pairs(
    const Prompt& prompt, const std::vector<std::vector<TokenId>>& samples,
    const std::set<TokenId>& gold_units);

// Full-batch gradient descent on mean pairwise loss, same schedule and
// early-stopping scheme as the classifier trainer. holdout_accuracy is the
// fraction of held-out pairs ranked correctly (strictly higher preferred
// score).
ScalarRM train_scalar_rm(const std::vector<ComparisonPair>& pairs,
                         const SequenceFeatureExtractor& features,
                         const RmTrainOptions& options, RmTrainReport* report = nullptr);

// Scorer adapters so trained RMs can drive training like any oracle.
class ClassifierRmScorer : public SegmentScorer {
 public:
  explicit ClassifierRmScorer(std::shared_ptr<const ClassifierRM> model)
      : model_(std::move(model)) {}
  std::vector<double> score(const Prompt& prompt, const std::vector<TokenId>& actions,
                            const std::vector<Segment>& segments) const override;

 private:
  std::shared_ptr<const ClassifierRM> model_;
};

class ScalarRmScorer : public SegmentScorer {
 public:
  explicit ScalarRmScorer(std::shared_ptr<const ScalarRM> model) : model_(std::move(model)) {}
  std::vector<double> score(const Prompt& prompt, const std::vector<TokenId>& actions,
                            const std::vector<Segment>& segments) const override;

 private:
  std::shared_ptr<const ScalarRM> model_;
};

}  // namespace fgrlhf
