#pragma once

#include "bagged_rl/causal_env.hpp"
#include "bagged_rl/features.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace bagged_rl {

// Linear fitted Q-iteration on random-action episodes, used to obtain a
// near-optimal policy for STE estimation.
struct FqiConfig {
  int episodes = 5000;
  int horizon = 252;
  double gamma_bar = 0.99;
  double ridge = 1e-3;
  int max_iterations = 40;
  std::uint64_t seed = 0;
  BasisKind basis = BasisKind::pooled;
};

struct FqiResult {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool converged = false;        // greedy next-step choices stopped changing
  long changed_last = 0;         // greedy choices that flipped in the final iteration
  double fixed_point_gap = 0.0;  // sup |T(beta) - beta| for one plain FQI step
  long rows = 0;
};

FqiResult fitted_q_iteration(const EnvParams& p, const FqiConfig& cfg);

// Greedy policy in a linear Q-function (ties to action 0).
StepPolicy greedy_step_policy(BasisKind basis, Eigen::VectorXd beta);

}  // namespace bagged_rl
