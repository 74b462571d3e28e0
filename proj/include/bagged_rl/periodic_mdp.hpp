#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <string>
#include <vector>

namespace bagged_rl {

// Finite K-periodic MDP. All step indices are zero-based: step k = 0 is the
// first decision time of a bag.
//
// transitions[k] has one row per (s, a) pair of the *previous* step, row index
// s * |A_prev| + a, and |S_k| columns. transitions[0] is the bag-to-bag kernel
// out of step K-1.
struct TabularPeriodicMdp {
  int K = 0;
  std::vector<int> state_counts;
  std::vector<int> action_counts;
  std::vector<Eigen::MatrixXd> transitions;
  std::vector<Eigen::MatrixXd> reward_means;  // |S_k| x |A_k|
  std::vector<double> discounts;
  Eigen::VectorXd initial_dist;

  int prev(int k) const { return (k + K - 1) % K; }
  int next(int k) const { return (k + 1) % K; }
  double gamma_bar() const;

  // Throws ShapeError / ConfigError if any invariant is violated.
  void validate() const;
};

struct QFunctions {
  std::vector<Eigen::MatrixXd> tables;  // |S_k| x |A_k|

  int K() const { return static_cast<int>(tables.size()); }
  Eigen::VectorXd values(int k) const;  // row-wise max
};

struct PeriodicPolicy {
  std::vector<Eigen::MatrixXd> probs;  // |S_k| x |A_k|, rows sum to 1

  void validate() const;
  static PeriodicPolicy uniform(const TabularPeriodicMdp& mdp);
  static PeriodicPolicy deterministic(const TabularPeriodicMdp& mdp,
                                      const std::vector<std::vector<int>>& actions);
};

struct BagStep {
  std::size_t bag = 0;
  int step = 0;
};

// Sum over (t,l) >= start of eta * R_{t,l}, with eta the product of the
// discounts of every step in [start, (t,l)).
double discounted_return(const std::vector<std::vector<double>>& rewards,
                         const std::vector<double>& discounts, BagStep start);

struct IterationTrace {
  std::vector<double> residuals;  // residual after each sweep
  int sweeps = 0;
};

QFunctions value_iteration(const TabularPeriodicMdp& mdp, double tol = 1e-10,
                           long max_sweeps = 1000000, const QFunctions* init = nullptr,
                           IterationTrace* trace = nullptr);

QFunctions evaluate_policy(const TabularPeriodicMdp& mdp, const PeriodicPolicy& policy,
                           double tol = 1e-10, long max_sweeps = 1000000,
                           IterationTrace* trace = nullptr);

// V^pi_k(s) = sum_a pi_k(a|s) Q^pi_k(s,a)
std::vector<Eigen::VectorXd> policy_values(const QFunctions& q, const PeriodicPolicy& policy);

// Deterministic; ties go to the lowest action index.
PeriodicPolicy greedy_policy(const QFunctions& q);
std::vector<std::vector<int>> greedy_actions(const QFunctions& q);

double bellman_residual(const TabularPeriodicMdp& mdp, const QFunctions& q);

// One-step lookahead: r_k + gamma_k * P_{k+1} v_next, shaped |S_k| x |A_k|.
Eigen::MatrixXd backup(const TabularPeriodicMdp& mdp, int k, const Eigen::VectorXd& v_next);

nlohmann::json to_json(const TabularPeriodicMdp& mdp);
TabularPeriodicMdp mdp_from_json(const nlohmann::json& j);
TabularPeriodicMdp load_mdp(const std::string& path);
void save_mdp(const TabularPeriodicMdp& mdp, const std::string& path);

nlohmann::json to_json(const QFunctions& q);

}  // namespace bagged_rl
