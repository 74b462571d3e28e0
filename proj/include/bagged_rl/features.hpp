#pragma once

#include "bagged_rl/history.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace bagged_rl {

enum class StateKind { S_prime, S_doubleprime, S_tripleprime };

std::string to_string(StateKind k);
StateKind state_kind_from_string(const std::string& s);

// S'   = [E, R, M_{1:k-1}, A_{1:k-1}, C_k]
// S''  = [E, R, A_{1:k-1}]
// S''' = [E, R, C_{1:k-1}, A_{1:k-1}, C_k]
Eigen::VectorXd build_state(const StepView& v, StateKind kind);
Eigen::VectorXd build_state(const ObservedHistory& h, StateKind kind);

// Bases that share one weight vector across the K steps of a bag: a main
// block with k, kE, kR terms and step-masked history, followed by K
// interaction blocks of which only block k is nonzero (and only for a = 1).
enum class BasisKind { pooled, brlsvi_Sp, brlsvi_Spp, brlsvi_Sppp };

std::string to_string(BasisKind k);
BasisKind basis_kind_from_string(const std::string& s);
BasisKind basis_for_state(StateKind k);

int basis_dim(BasisKind kind, int K);
int main_block_dim(BasisKind kind, int K);
// Offset and length of the interaction block for step k (1-based).
int block_offset(BasisKind kind, int K, int k);
int block_dim(BasisKind kind, int k);

// Writes basis_dim(kind, K) values into out.
void fill_features(BasisKind kind, const StepView& v, int a, double* out);
Eigen::VectorXd features(BasisKind kind, const StepView& v, int a);

// The 35-dimensional pooled basis; only defined for K = 5.
Eigen::VectorXd features_pooled(const StepView& v, int a);
Eigen::VectorXd features_pooled(const ObservedHistory& h, int a);

// Per-step RLSVI basis at step k: [1, E, R, M_{1:k-1}, A_{1:k-1}, C, a, aE, aR, aC].
int rlsvi_dim(int k);
Eigen::VectorXd features_rlsvi(const StepView& v, int a);

// Thompson sampling basis [1, E, R, C, a, aE, aR, aC].
inline constexpr int kTsDim = 8;
Eigen::VectorXd features_ts(const StepView& v, int a);

// Bag-level SRLSVI basis: [1, E, R] followed by one [1, E, R] block per bag
// action, only the chosen one nonzero.
int srlsvi_dim(int K);
Eigen::VectorXd features_srlsvi(double E_prev, double R_prev, int bag_action, int K);
// (A_1 ... A_K) read as big-endian bits.
int bag_action_index(std::span<const int> actions);
std::vector<int> bag_action_bits(int index, int K);

enum class AgentFeatureKind { srlsvi, rlsvi_k, ts, brlsvi_Sp, brlsvi_Spp, brlsvi_Sppp };

// Dispatch over the agents' bases. For srlsvi `action` is the bag-action
// index and only E_prev, R_prev of the view are used.
Eigen::VectorXd features_agent(AgentFeatureKind kind, const StepView& v, int action);
int features_agent_dim(AgentFeatureKind kind, int K, int k);

}  // namespace bagged_rl
