#include "fgrlhf/reward_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fgrlhf/errors.hpp"
#include "fgrlhf/rng.hpp"

namespace fgrlhf {

std::vector<double> SegmentFeatureExtractor::extract(const std::vector<TokenId>& actions,
                                                     const Span& span) const {
  const int total = static_cast<int>(actions.size());
  if (span.begin < 1 || span.end < span.begin || span.end > total) {
    throw ShapeError("segment span outside output");
  }
  std::vector<double> phi(static_cast<std::size_t>(dim()), 0.0);
  for (int t = span.begin; t <= span.end; ++t) {
    const TokenId tok = actions[static_cast<std::size_t>(t - 1)];
    if (tok < 0 || tok >= vocab_size) throw InvalidTokenError("segment token outside vocabulary");
    phi[static_cast<std::size_t>(tok)] = 1.0;
  }
  phi[static_cast<std::size_t>(vocab_size)] =
      static_cast<double>(span.begin - 1) / static_cast<double>(std::max(1, total));
  phi[static_cast<std::size_t>(vocab_size + 1)] = 1.0;
  return phi;
}

std::vector<double> SequenceFeatureExtractor::extract(const std::vector<TokenId>& actions) const {
  std::vector<double> phi(static_cast<std::size_t>(dim()), 0.0);
  for (TokenId tok : actions) {
    if (tok < 0 || tok >= vocab_size) throw InvalidTokenError("token outside vocabulary");
    phi[static_cast<std::size_t>(tok)] = 1.0;
  }
  phi[static_cast<std::size_t>(vocab_size)] = 1.0;
  return phi;
}

namespace {

// P(class 1) for a two-logit row, numerically stable.
double logistic_of_diff(double logit1_minus_logit0) {
  if (logit1_minus_logit0 >= 0.0) {
    const double e = std::exp(-logit1_minus_logit0);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(logit1_minus_logit0);
  return e / (1.0 + e);
}

void two_logits(const Matrix& weights, const std::vector<double>& phi, double& l0, double& l1) {
  if (static_cast<int>(phi.size()) != weights.rows()) {
    throw ShapeError("feature length does not match classifier weights");
  }
  l0 = 0.0;
  l1 = 0.0;
  for (int f = 0; f < weights.rows(); ++f) {
    const double x = phi[static_cast<std::size_t>(f)];
    if (x == 0.0) continue;
    l0 += x * weights.at(f, 0);
    l1 += x * weights.at(f, 1);
  }
}

}  // namespace

double ClassifierRM::error_probability(const std::vector<double>& phi) const {
  double l0, l1;
  two_logits(weights, phi, l0, l1);
  return logistic_of_diff(l1 - l0);
}

bool ClassifierRM::predicts_no_error(const std::vector<double>& phi) const {
  double l0, l1;
  two_logits(weights, phi, l0, l1);
  return l0 >= l1;
}

namespace {

constexpr std::uint64_t pack_aux(int category, Density density) {
  return (static_cast<std::uint64_t>(category) << 8) | static_cast<std::uint64_t>(density);
}

}  // namespace

void ClassifierRM::save(const std::filesystem::path& path) const {
  save_matrix(path, weights, pack_aux(category, density));
}

ClassifierRM ClassifierRM::load(const std::filesystem::path& path) {
  LoadedMatrix loaded = load_matrix(path);
  if (loaded.matrix.cols() != 2) throw ParseError("classifier file must have two columns");
  ClassifierRM rm;
  rm.category = static_cast<int>(loaded.aux >> 8);
  rm.density = static_cast<Density>(loaded.aux & 0xff);
  rm.features.vocab_size = loaded.matrix.rows() - 2;
  rm.weights = std::move(loaded.matrix);
  return rm;
}

double ScalarRM::score(const std::vector<TokenId>& actions) const {
  const std::vector<double> phi = features.extract(actions);
  double s = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) s += phi[i] * weights[i];
  return s;
}

void ScalarRM::save(const std::filesystem::path& path) const {
  Matrix m(static_cast<int>(weights.size()), 1);
  std::copy(weights.begin(), weights.end(), m.data().begin());
  save_matrix(path, m, 0);
}

ScalarRM ScalarRM::load(const std::filesystem::path& path) {
  LoadedMatrix loaded = load_matrix(path);
  if (loaded.matrix.cols() != 1) throw ParseError("scalar RM file must have one column");
  ScalarRM rm;
  rm.features.vocab_size = loaded.matrix.rows() - 1;
  rm.weights = std::move(loaded.matrix.data());
  return rm;
}

double learned_rm_segment_reward(const ClassifierRM& model, const std::vector<TokenId>& actions,
                                 const Segment& segment) {
  const std::vector<double> phi = model.features.extract(actions, segment.span());
  return model.predicts_no_error(phi) ? 1.0 : -1.0;
}

double learned_rm_segment_reward(const ScalarRM& model, const std::vector<TokenId>& actions) {
  return model.score(actions);
}

double pairwise_loss(double score_preferred, double score_other) {
  // softplus(-(d)) with d = score_preferred - score_other.
  const double x = -(score_preferred - score_other);
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

namespace {

// Deterministic split: shuffled order, trailing fraction held out.
struct HoldoutSplit {
  std::vector<int> train;
  std::vector<int> holdout;
};

HoldoutSplit split_indices(int count, double fraction, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = RngStream::substream(seed, 0x5eed5);
  rng.shuffle(order);
  int holdout_count = 0;
  if (fraction > 0.0 && count >= 2) {
    holdout_count = std::max(1, static_cast<int>(std::lround(fraction * count)));
    holdout_count = std::min(holdout_count, count - 1);
  }
  HoldoutSplit split;
  split.train.assign(order.begin(), order.end() - holdout_count);
  split.holdout.assign(order.end() - holdout_count, order.end());
  return split;
}

}  // namespace

ClassifierRM train_classifier_rm(const std::vector<LabeledSegment>& data,
                                 const SegmentFeatureExtractor& features, int category,
                                 Density density, const RmTrainOptions& options,
                                 RmTrainReport* report) {
  std::vector<int> usable;
  int excluded = 0;
  for (int i = 0; i < static_cast<int>(data.size()); ++i) {
    if (data[static_cast<std::size_t>(i)].label == SegmentLabel::kExcluded) {
      ++excluded;
    } else {
      usable.push_back(i);
    }
  }
  if (usable.empty()) throw ConfigError("classifier training set has no usable segments");
  const int dim = features.dim();
  for (int i : usable) {
    if (static_cast<int>(data[static_cast<std::size_t>(i)].features.size()) != dim) {
      throw ShapeError("classifier training features have wrong length");
    }
  }

  bool saw_no_error = false, saw_has_error = false;
  for (int i : usable) {
    (data[static_cast<std::size_t>(i)].label == SegmentLabel::kHasError ? saw_has_error
                                                                        : saw_no_error) = true;
  }

  HoldoutSplit split = split_indices(static_cast<int>(usable.size()), options.holdout_fraction,
                                     options.seed);
  auto resolve = [&](const std::vector<int>& order) {
    std::vector<int> out;
    out.reserve(order.size());
    for (int i : order) out.push_back(usable[static_cast<std::size_t>(i)]);
    return out;
  };
  const std::vector<int> train_idx = resolve(split.train);
  const std::vector<int> holdout_idx = resolve(split.holdout);

  ClassifierRM rm;
  rm.category = category;
  rm.density = density;
  rm.features = features;
  rm.weights = Matrix(dim, 2, 0.0);

  auto mean_loss = [&](const Matrix& w, const std::vector<int>& idx) {
    double loss = 0.0;
    for (int i : idx) {
      const LabeledSegment& ex = data[static_cast<std::size_t>(i)];
      double l0, l1;
      two_logits(w, ex.features, l0, l1);
      const double target_logit = ex.label == SegmentLabel::kHasError ? l1 : l0;
      const double m = std::max(l0, l1);
      // -log softmax(target), stable two-class form.
      loss += (m + std::log(std::exp(l0 - m) + std::exp(l1 - m))) - target_logit;
    }
    return loss / static_cast<double>(idx.size());
  };

  Matrix best = rm.weights;
  double best_holdout = holdout_idx.empty() ? 0.0 : mean_loss(rm.weights, holdout_idx);
  int best_epoch = 0;
  int stale = 0;
  std::vector<double> loss_history;
  Matrix grad(dim, 2);

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    loss_history.push_back(mean_loss(rm.weights, train_idx));
    grad.fill(0.0);
    const double inv = 1.0 / static_cast<double>(train_idx.size());
    for (int i : train_idx) {
      const LabeledSegment& ex = data[static_cast<std::size_t>(i)];
      double l0, l1;
      two_logits(rm.weights, ex.features, l0, l1);
      const double p1 = logistic_of_diff(l1 - l0);
      const double y1 = ex.label == SegmentLabel::kHasError ? 1.0 : 0.0;
      // dL/dlogit1 = p1 - y1, dL/dlogit0 = (1-p1) - (1-y1) = y1 - p1.
      const double g1 = (p1 - y1) * inv;
      for (int f = 0; f < dim; ++f) {
        const double x = ex.features[static_cast<std::size_t>(f)];
        if (x == 0.0) continue;
        grad.at(f, 0) += -g1 * x;
        grad.at(f, 1) += g1 * x;
      }
    }
    rm.weights.axpy(-options.step_size, grad);

    if (!holdout_idx.empty()) {
      const double h = mean_loss(rm.weights, holdout_idx);
      if (h < best_holdout - 1e-12) {
        best_holdout = h;
        best = rm.weights;
        best_epoch = epoch + 1;
        stale = 0;
      } else if (++stale >= options.patience) {
        break;
      }
    }
  }
  if (!holdout_idx.empty()) {
    rm.weights = best;
  } else {
    best_holdout = mean_loss(rm.weights, train_idx);
    best_epoch = static_cast<int>(loss_history.size());
  }

  if (report) {
    report->train_loss = std::move(loss_history);
    report->best_holdout_loss = best_holdout;
    report->best_epoch = best_epoch;
    report->train_count = static_cast<int>(train_idx.size());
    report->holdout_count = static_cast<int>(holdout_idx.size());
    report->excluded_count = excluded;
    report->single_class = !(saw_no_error && saw_has_error);
    const std::vector<int>& eval_idx = holdout_idx.empty() ? train_idx : holdout_idx;
    int correct = 0;
    for (int i : eval_idx) {
      const LabeledSegment& ex = data[static_cast<std::size_t>(i)];
      const bool predicted_clean = rm.predicts_no_error(ex.features);
      const bool is_clean = ex.label == SegmentLabel::kNoError;
      if (predicted_clean == is_clean) ++correct;
    }
    report->holdout_accuracy = static_cast<double>(correct) / static_cast<double>(eval_idx.size());
  }
  return rm;
}

std::vector<ComparisonPair> bootstrap_completeness_pairs(
    const Prompt& prompt, const std::vector<std::vector<TokenId>>& samples,
    const std::set<TokenId>& gold_units) {
  if (gold_units.empty()) {
    throw UndefinedScoreError("bootstrap scoring undefined: no gold units");
  }
  if (samples.size() < 2) throw ShapeError("bootstrapping needs at least two samples");
  std::vector<double> scores;
  scores.reserve(samples.size());
  for (const std::vector<TokenId>& y : samples) {
    std::set<TokenId> covered;
    for (TokenId tok : y) {
      if (gold_units.count(tok)) covered.insert(tok);
    }
    scores.push_back(static_cast<double>(covered.size()) /
                     static_cast<double>(gold_units.size()));
  }
  std::vector<ComparisonPair> pairs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      if (scores[i] == scores[j]) continue;  // ties carry no preference
      ComparisonPair pair;
      pair.prompt_id = prompt.id;
      if (scores[i] > scores[j]) {
        pair.preferred = samples[i];
        pair.other = samples[j];
      } else {
        pair.preferred = samples[j];
        pair.other = samples[i];
      }
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

ScalarRM train_scalar_rm(const std::vector<ComparisonPair>& pairs,
                         const SequenceFeatureExtractor& features,
                         const RmTrainOptions& options, RmTrainReport* report) {
  if (pairs.empty()) throw ConfigError("scalar RM training set has no pairs");
  const int dim = features.dim();

  // Features are fixed per pair; extract once.
  std::vector<std::vector<double>> phi_pref, phi_other;
  phi_pref.reserve(pairs.size());
  phi_other.reserve(pairs.size());
  for (const ComparisonPair& p : pairs) {
    phi_pref.push_back(features.extract(p.preferred));
    phi_other.push_back(features.extract(p.other));
  }

  HoldoutSplit split =
      split_indices(static_cast<int>(pairs.size()), options.holdout_fraction, options.seed);

  ScalarRM rm;
  rm.features = features;
  rm.weights.assign(static_cast<std::size_t>(dim), 0.0);

  auto dot_score = [&](const std::vector<double>& w, const std::vector<double>& phi) {
    double s = 0.0;
    for (int f = 0; f < dim; ++f) s += w[static_cast<std::size_t>(f)] * phi[static_cast<std::size_t>(f)];
    return s;
  };
  auto mean_loss = [&](const std::vector<double>& w, const std::vector<int>& idx) {
    double loss = 0.0;
    for (int i : idx) {
      loss += pairwise_loss(dot_score(w, phi_pref[static_cast<std::size_t>(i)]),
                            dot_score(w, phi_other[static_cast<std::size_t>(i)]));
    }
    return loss / static_cast<double>(idx.size());
  };

  std::vector<double> best = rm.weights;
  double best_holdout = split.holdout.empty() ? 0.0 : mean_loss(rm.weights, split.holdout);
  int best_epoch = 0;
  int stale = 0;
  std::vector<double> loss_history;
  std::vector<double> grad(static_cast<std::size_t>(dim));

  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    loss_history.push_back(mean_loss(rm.weights, split.train));
    std::fill(grad.begin(), grad.end(), 0.0);
    const double inv = 1.0 / static_cast<double>(split.train.size());
    for (int i : split.train) {
      const std::vector<double>& fp = phi_pref[static_cast<std::size_t>(i)];
      const std::vector<double>& fo = phi_other[static_cast<std::size_t>(i)];
      const double d = dot_score(rm.weights, fp) - dot_score(rm.weights, fo);
      // dL/dd of softplus(-d) is -sigma(-d).
      const double coeff = -logistic_of_diff(-d) * inv;
      for (int f = 0; f < dim; ++f) {
        grad[static_cast<std::size_t>(f)] +=
            coeff * (fp[static_cast<std::size_t>(f)] - fo[static_cast<std::size_t>(f)]);
      }
    }
    for (int f = 0; f < dim; ++f) {
      rm.weights[static_cast<std::size_t>(f)] -= options.step_size * grad[static_cast<std::size_t>(f)];
    }

    if (!split.holdout.empty()) {
      const double h = mean_loss(rm.weights, split.holdout);
      if (h < best_holdout - 1e-12) {
        best_holdout = h;
        best = rm.weights;
        best_epoch = epoch + 1;
        stale = 0;
      } else if (++stale >= options.patience) {
        break;
      }
    }
  }
  if (!split.holdout.empty()) {
    rm.weights = best;
  } else {
    best_holdout = mean_loss(rm.weights, split.train);
    best_epoch = static_cast<int>(loss_history.size());
  }

  if (report) {
    report->train_loss = std::move(loss_history);
    report->best_holdout_loss = best_holdout;
    report->best_epoch = best_epoch;
    report->train_count = static_cast<int>(split.train.size());
    report->holdout_count = static_cast<int>(split.holdout.size());
    report->excluded_count = 0;
    report->single_class = false;
    const std::vector<int>& eval_idx = split.holdout.empty() ? split.train : split.holdout;
    int correct = 0;
    for (int i : eval_idx) {
      if (dot_score(rm.weights, phi_pref[static_cast<std::size_t>(i)]) >
          dot_score(rm.weights, phi_other[static_cast<std::size_t>(i)])) {
        ++correct;
      }
    }
    report->holdout_accuracy = static_cast<double>(correct) / static_cast<double>(eval_idx.size());
  }
  return rm;
}

std::vector<double> ClassifierRmScorer::score(const Prompt&, const std::vector<TokenId>& actions,
                                              const std::vector<Segment>& segments) const {
  std::vector<double> out;
  out.reserve(segments.size());
  for (const Segment& seg : segments) {
    out.push_back(learned_rm_segment_reward(*model_, actions, seg));
  }
  return out;
}

std::vector<double> ScalarRmScorer::score(const Prompt&, const std::vector<TokenId>& actions,
                                          const std::vector<Segment>& segments) const {
  std::vector<double> out;
  out.reserve(segments.size());
  for (const Segment& seg : segments) {
    (void)seg;
    out.push_back(learned_rm_segment_reward(*model_, actions));
  }
  return out;
}

}  // namespace fgrlhf
