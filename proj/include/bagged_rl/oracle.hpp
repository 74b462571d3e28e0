#pragma once

#include "bagged_rl/dag_env.hpp"
#include "bagged_rl/periodic_mdp.hpp"
#include "bagged_rl/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

namespace bagged_rl {

struct EnumerationResult {
  std::vector<Eigen::VectorXd> values;   // per step, max over all deterministic policies
  std::vector<std::vector<int>> policy;  // a policy attaining the max at every state
  Eigen::VectorXd initial_values;        // values[0]
  long policies = 0;
};

// Exhaustive search over deterministic stationary periodic policies. Each
// policy is evaluated by an exact linear solve of the stacked evaluation
// equations, or, with truncation_bags > 0, by a finite backward recursion
// over that many bags. Throws SizeError past 10^6 policies.
EnumerationResult enumerate_optimal(const TabularPeriodicMdp& mdp, int truncation_bags = 0);

// Value of a deterministic policy by direct linear solve, per step.
std::vector<Eigen::VectorXd> evaluate_exact(const TabularPeriodicMdp& mdp,
                                            const std::vector<std::vector<int>>& actions);

// Random instance: |S_k| uniform in [1, max_states], dense random kernels,
// rewards in [-1, 1], per-step discounts gamma_bar^{w_k} with random weights
// summing to one.
TabularPeriodicMdp random_mdp(Rng& rng, int K, int max_states, int actions, double gamma_bar);

struct GapRow {
  int k = 0;  // zero-based step
  int u = 0;  // coarse state index
  std::string label;
  double mass = 0.0;      // P(U_k = u) in the first bag under uniform actions
  double v_fine = 0.0;    // E[V^fine_k(S) | U = u]
  double v_coarse = 0.0;  // V^coarse_k(u)
  double gap = 0.0;       // v_fine - v_coarse
  // gap = jensen + propagated; jensen = E[max_a Q^fine | u] - max_a E[Q^fine | u]
  double jensen = 0.0;
  double propagated = 0.0;
  // For every action a, P(a is fine-optimal | U = u) < 1.
  bool condition_holds = false;
};

struct GapReport {
  std::vector<GapRow> rows;
  double initial_fine = 0.0;    // nu' V^fine_0
  double initial_coarse = 0.0;  // nu' V^coarse_0
};

// Compiles both kinds, solves them by value iteration, and compares the
// coarse values with the fine values averaged over P(S | U = u). The coarse
// coordinates must be a subset of the fine ones (ConfigError otherwise).
GapReport theorem2_gap(const DiscreteDagEnv& env, const StateCoords& fine, const StateCoords& coarse,
                       double gamma_bar);
GapReport theorem2_gap(const DiscreteDagEnv& env, DagStateKind fine, DagStateKind coarse,
                       double gamma_bar);

nlohmann::json to_json(const GapReport& r);

}  // namespace bagged_rl
