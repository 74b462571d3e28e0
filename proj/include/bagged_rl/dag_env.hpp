#pragma once

#include "bagged_rl/periodic_mdp.hpp"
#include "bagged_rl/rng.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace bagged_rl {

// Conditional probability table with a fixed parent order. Entries are stored
// with the parents as a mixed-radix index and the child value last.
struct Cpt {
  std::vector<int> parent_sizes;
  int child_size = 0;
  std::vector<double> table;

  Cpt() = default;
  Cpt(std::vector<int> parents, int child);
  std::size_t rows() const;
  double operator()(std::size_t parent_index, int child) const {
    return table[parent_index * static_cast<std::size_t>(child_size) + static_cast<std::size_t>(child)];
  }
  double& at(std::size_t parent_index, int child) {
    return table[parent_index * static_cast<std::size_t>(child_size) + static_cast<std::size_t>(child)];
  }
  void validate(const std::string& name) const;
};

// Finite-alphabet structural model of one bag: contexts C_k, binary actions
// A_k, measured mediators M_k, unmeasured mediators N_k, then engagement E
// and reward R at the end of the bag.
//
// Parent orders (child last):
//   C     : [] or [E_prev, R_prev] with flag_RC            (shared by all k)
//   M[k]  : [E_prev, R_prev, C_k, A_k]
//   N[k]  : [E_prev, A_k]
//   E     : [E_prev, N_1, ..., N_K] (+ R_prev with flag_RE)
//   R     : [R_prev, M_1, ..., M_K, E_new] (+ A_1, ..., A_K with flag_AR)
struct DiscreteDagEnv {
  int K = 2;
  int nE = 2, nR = 2, nC = 2, nM = 2, nN = 2;
  std::vector<double> r_values;  // numeric reward of each R category
  std::vector<double> prior;     // joint of (E_0, R_0), index e * nR + r
  bool flag_RE = false, flag_AR = false, flag_RC = false;
  Cpt C;
  std::vector<Cpt> M, N;
  Cpt E, R;

  void validate() const;
};

nlohmann::json to_json(const DiscreteDagEnv& env);
DiscreteDagEnv dag_env_from_json(const nlohmann::json& j);
DiscreteDagEnv load_dag_env(const std::string& path);

struct DagFlags {
  bool RE = false, AR = false, RC = false;
};

// K = 2, alphabets of size 2 or 3, every row normalized from weights drawn
// uniformly in [1, 6] (entries in [1/13, 6/7]).
DiscreteDagEnv random_dag_env(Rng& rng, DagFlags flags = {}, int K = 2);

enum class DagStateKind { S, S_prime, S_doubleprime };
std::string to_string(DagStateKind k);
DagStateKind dag_state_kind_from_string(const std::string& s);

// Per-step state alphabet: named coordinates with their radices.
struct StateSpace {
  std::vector<std::string> names;
  std::vector<int> radices;

  int size() const;
  std::vector<int> decode(int index) const;
  std::string label(int index) const;
};

// Which within-bag coordinates a state keeps besides (E_prev, R_prev). The
// three named kinds are fixed selections; other selections are allowed for
// experiments (and to exercise the non-Markov check).
struct StateCoords {
  bool M = false, N = false, A = false, C = false;
};
StateCoords coords(DagStateKind k);

// State alphabet of step k (zero-based).
StateSpace state_space(const DiscreteDagEnv& env, const StateCoords& c, int k);

struct CompiledMdp {
  TabularPeriodicMdp mdp;
  std::vector<StateSpace> spaces;
};

// Marginalizes the CPTs into a K-periodic MDP over the chosen state. Rewards
// are zero except at step K; discounts are [1, ..., 1, gamma_bar]. Throws
// NonMarkovError if the induced kernel changes with the behaviour policy.
CompiledMdp compile_dag_to_mdp(const DiscreteDagEnv& env, DagStateKind kind, double gamma_bar);
CompiledMdp compile_dag_to_mdp(const DiscreteDagEnv& env, const StateCoords& c, double gamma_bar);

// Joint mass of (fine state, coarse state) at step k (zero-based) within the
// first bag, under uniformly random actions and the env prior. Shape
// |fine| x |coarse|.
Eigen::MatrixXd joint_state_mass(const DiscreteDagEnv& env, const StateCoords& fine,
                                 const StateCoords& coarse, int k);

}  // namespace bagged_rl
