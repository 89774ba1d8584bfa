#pragma once

#include <vector>

namespace fgrlhf {

// Generalized advantage estimates for one episode:
//
//   A_t = sum_{t'=t}^{T} (gamma*lambda)^(t'-t) * (r_t' + gamma*V(s_{t'+1}) - V(s_t'))
//
// computed by the backward recursion A_t = delta_t + gamma*lambda*A_{t+1}.
// `values` holds V(s_1)..V(s_{T+1}): one more entry than rewards. The
// caller supplies the terminal bootstrap in values[T]: 0 after an eos
// termination, the old value estimate of the truncated state otherwise.
std::vector<double> compute_gae(const std::vector<double>& rewards,
                                const std::vector<double>& values, double gamma, double lambda);

// Regression targets for the value head:
//
//   target_t = sum_{t'=t}^{T-1} gamma^(t'-t) * r_t' + gamma^(T-t) * V_old(s_T)
//
// via target_T = V_old(s_T), target_t = r_t + gamma*target_{t+1}. The final
// reward r_T deliberately does not appear; the horizon is capped by the old
// value estimate at the last pre-action state.
std::vector<double> compute_value_targets(const std::vector<double>& rewards,
                                          double v_old_last_state, double gamma);

// In-place whitening to zero mean and unit population variance across all
// entries. A (near-)constant input whitens to all zeros.
void whiten(std::vector<std::vector<double>>& values);

}  // namespace fgrlhf
