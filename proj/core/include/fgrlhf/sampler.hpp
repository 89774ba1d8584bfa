#pragma once

#include <span>
#include <string>

#include "fgrlhf/rng.hpp"
#include "fgrlhf/vocab.hpp"

namespace fgrlhf {

enum class SampleMode { kNucleus, kTopK, kGreedy };

// Exploration-time shaping of the temperature-1 policy distribution.
// Temperature rescales first (p_i^(1/tau), renormalized), then the mode
// truncates: nucleus keeps the smallest descending-probability prefix with
// cumulative mass >= p, top-k keeps the k most likely tokens, greedy takes
// the argmax (lowest id on ties). The episode's recorded log-probs always
// come from the unshaped distribution.
struct SamplerConfig {
  SampleMode mode = SampleMode::kNucleus;
  double p = 0.9;
  int k = 0;
  double temperature = 1.0;

  // Throws ConfigError on out-of-range settings for the given vocabulary.
  void validate(int vocab_size) const;
};

TokenId sample_action(std::span<const double> dist, const SamplerConfig& config,
                      RngStream& rng);

const char* sample_mode_name(SampleMode m);
SampleMode sample_mode_from_name(const std::string& name);

}  // namespace fgrlhf
