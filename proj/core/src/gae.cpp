#include "fgrlhf/gae.hpp"

#include <cmath>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

std::vector<double> compute_gae(const std::vector<double>& rewards,
                                const std::vector<double>& values, double gamma, double lambda) {
  const int total = static_cast<int>(rewards.size());
  if (static_cast<int>(values.size()) != total + 1) {
    throw ShapeError("compute_gae: values must have one more entry than rewards");
  }
  std::vector<double> advantages(static_cast<std::size_t>(total), 0.0);
  double next = 0.0;  // A_{T+1}
  for (int t = total - 1; t >= 0; --t) {
    const double delta = rewards[static_cast<std::size_t>(t)] +
                         gamma * values[static_cast<std::size_t>(t + 1)] -
                         values[static_cast<std::size_t>(t)];
    next = delta + gamma * lambda * next;
    advantages[static_cast<std::size_t>(t)] = next;
  }
  return advantages;
}

std::vector<double> compute_value_targets(const std::vector<double>& rewards,
                                          double v_old_last_state, double gamma) {
  const int total = static_cast<int>(rewards.size());
  if (total == 0) return {};
  std::vector<double> targets(static_cast<std::size_t>(total), 0.0);
  targets[static_cast<std::size_t>(total - 1)] = v_old_last_state;
  for (int t = total - 2; t >= 0; --t) {
    targets[static_cast<std::size_t>(t)] =
        rewards[static_cast<std::size_t>(t)] + gamma * targets[static_cast<std::size_t>(t + 1)];
  }
  return targets;
}

void whiten(std::vector<std::vector<double>>& values) {
  std::size_t count = 0;
  double mean = 0.0;
  for (const auto& row : values) {
    for (double v : row) {
      mean += v;
      ++count;
    }
  }
  if (count == 0) return;
  mean /= static_cast<double>(count);
  double variance = 0.0;
  for (const auto& row : values) {
    for (double v : row) {
      const double d = v - mean;
      variance += d * d;
    }
  }
  variance /= static_cast<double>(count);
  const double std_dev = std::sqrt(variance);
  for (auto& row : values) {
    for (double& v : row) {
      v = std_dev > 1e-12 ? (v - mean) / std_dev : 0.0;
    }
  }
}

}  // namespace fgrlhf
