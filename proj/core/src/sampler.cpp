#include "fgrlhf/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

void SamplerConfig::validate(int vocab_size) const {
  if (temperature <= 0.0) throw ConfigError("sampler temperature must be > 0");
  switch (mode) {
    case SampleMode::kNucleus:
      if (p <= 0.0 || p > 1.0) throw ConfigError("nucleus p must be in (0, 1]");
      break;
    case SampleMode::kTopK:
      if (k < 1 || k > vocab_size) throw ConfigError("top-k k must be in [1, V]");
      break;
    case SampleMode::kGreedy:
      break;
  }
}

TokenId sample_action(std::span<const double> dist, const SamplerConfig& config,
                      RngStream& rng) {
  const int vocab = static_cast<int>(dist.size());
  if (vocab == 0) throw ShapeError("sample_action: empty distribution");

  if (config.mode == SampleMode::kGreedy) {
    int best = 0;
    for (int v = 1; v < vocab; ++v) {
      if (dist[static_cast<std::size_t>(v)] > dist[static_cast<std::size_t>(best)]) best = v;
    }
    return best;
  }

  // Temperature rescale: p_i^(1/tau), renormalized. Equivalent to dividing
  // logits by tau before the softmax.
  std::vector<double> probs(dist.begin(), dist.end());
  if (config.temperature != 1.0) {
    const double inv_tau = 1.0 / config.temperature;
    double total = 0.0;
    for (double& q : probs) {
      q = q > 0.0 ? std::pow(q, inv_tau) : 0.0;
      total += q;
    }
    if (total <= 0.0 || !std::isfinite(total)) {
      throw NumericalOverflowError("temperature rescale degenerated");
    }
    for (double& q : probs) q /= total;
  }

  // Descending probability, lowest id first among ties: deterministic
  // truncation order.
  std::vector<int> order(static_cast<std::size_t>(vocab));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
  });

  int kept = vocab;
  if (config.mode == SampleMode::kNucleus) {
    double cumulative = 0.0;
    for (int i = 0; i < vocab; ++i) {
      cumulative += probs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      if (cumulative >= config.p - 1e-12) {
        kept = i + 1;
        break;
      }
    }
  } else {  // top-k
    kept = std::min(config.k, vocab);
  }

  double total = 0.0;
  for (int i = 0; i < kept; ++i) {
    total += probs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  }
  const double u = rng.uniform() * total;
  double cumulative = 0.0;
  for (int i = 0; i < kept; ++i) {
    cumulative += probs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    if (u < cumulative) return order[static_cast<std::size_t>(i)];
  }
  return order[static_cast<std::size_t>(kept - 1)];
}

const char* sample_mode_name(SampleMode m) {
  switch (m) {
    case SampleMode::kNucleus: return "nucleus";
    case SampleMode::kTopK: return "top_k";
    case SampleMode::kGreedy: return "greedy";
  }
  return "unknown";
}

SampleMode sample_mode_from_name(const std::string& name) {
  if (name == "nucleus") return SampleMode::kNucleus;
  if (name == "top_k") return SampleMode::kTopK;
  if (name == "greedy") return SampleMode::kGreedy;
  throw ConfigError("unknown sampler mode: " + name);
}

}  // namespace fgrlhf
