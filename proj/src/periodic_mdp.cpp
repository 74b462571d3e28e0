#include "bagged_rl/periodic_mdp.hpp"

#include "bagged_rl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace bagged_rl {

namespace {

constexpr double kSumTol = 1e-12;

std::string step_name(int k) { return "step " + std::to_string(k); }

}  // namespace

double TabularPeriodicMdp::gamma_bar() const {
  double g = 1.0;
  for (double x : discounts) g *= x;
  return g;
}

void TabularPeriodicMdp::validate() const {
  if (K <= 0) throw ConfigError("K must be positive");
  auto uK = static_cast<std::size_t>(K);
  if (state_counts.size() != uK || action_counts.size() != uK || transitions.size() != uK ||
      reward_means.size() != uK || discounts.size() != uK)
    throw ShapeError("per-step arrays must all have length K");
  for (int k = 0; k < K; ++k) {
    if (state_counts[k] <= 0 || action_counts[k] <= 0)
      throw ConfigError("state and action counts must be positive");
  }
  for (int k = 0; k < K; ++k) {
    int p = prev(k);
    const auto& T = transitions[k];
    if (T.rows() != state_counts[p] * action_counts[p] || T.cols() != state_counts[k])
      throw ShapeError("transition kernel shape mismatch at " + step_name(k));
    if (!T.allFinite() || (T.array() < 0.0).any())
      throw ConfigError("transition kernel has negative or non-finite entries at " +
                        step_name(k));
    for (Eigen::Index r = 0; r < T.rows(); ++r) {
      if (std::abs(T.row(r).sum() - 1.0) > kSumTol)
        throw ConfigError("transition row does not sum to 1 at " + step_name(k));
    }
    const auto& R = reward_means[k];
    if (R.rows() != state_counts[k] || R.cols() != action_counts[k])
      throw ShapeError("reward shape mismatch at " + step_name(k));
    if (!R.allFinite()) throw ConfigError("non-finite reward at " + step_name(k));
    if (!(discounts[k] >= 0.0)) throw ConfigError("discounts must be nonnegative");
  }
  double g = gamma_bar();
  if (!(g < 1.0)) throw ConfigError("product of discounts must lie in [0, 1)");
  if (initial_dist.size() != state_counts[0]) throw ShapeError("initial_dist length mismatch");
  if ((initial_dist.array() < 0.0).any() || std::abs(initial_dist.sum() - 1.0) > kSumTol)
    throw ConfigError("initial_dist must be a probability vector");
}

Eigen::VectorXd QFunctions::values(int k) const { return tables.at(k).rowwise().maxCoeff(); }

void PeriodicPolicy::validate() const {
  for (const auto& P : probs) {
    if ((P.array() < 0.0).any()) throw ConfigError("negative policy probability");
    for (Eigen::Index s = 0; s < P.rows(); ++s)
      if (std::abs(P.row(s).sum() - 1.0) > kSumTol)
        throw ConfigError("policy distribution does not sum to 1");
  }
}

PeriodicPolicy PeriodicPolicy::uniform(const TabularPeriodicMdp& mdp) {
  PeriodicPolicy pi;
  for (int k = 0; k < mdp.K; ++k)
    pi.probs.push_back(Eigen::MatrixXd::Constant(mdp.state_counts[k], mdp.action_counts[k],
                                                 1.0 / mdp.action_counts[k]));
  return pi;
}

PeriodicPolicy PeriodicPolicy::deterministic(const TabularPeriodicMdp& mdp,
                                             const std::vector<std::vector<int>>& actions) {
  if (actions.size() != static_cast<std::size_t>(mdp.K)) throw ShapeError("policy has wrong K");
  PeriodicPolicy pi;
  for (int k = 0; k < mdp.K; ++k) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(mdp.state_counts[k], mdp.action_counts[k]);
    if (actions[k].size() != static_cast<std::size_t>(mdp.state_counts[k]))
      throw ShapeError("policy has wrong state count");
    for (int s = 0; s < mdp.state_counts[k]; ++s) P(s, actions[k][s]) = 1.0;
    pi.probs.push_back(std::move(P));
  }
  return pi;
}

double discounted_return(const std::vector<std::vector<double>>& rewards,
                         const std::vector<double>& discounts, BagStep start) {
  const std::size_t K = discounts.size();
  if (K == 0) throw ShapeError("discounts must have length K >= 1");
  for (const auto& bag : rewards)
    if (bag.size() != K) throw ShapeError("every bag must have K rewards");
  if (start.bag >= rewards.size() || start.step < 0 || static_cast<std::size_t>(start.step) >= K)
    throw std::out_of_range("start index outside the trajectory");
  double total = 0.0;
  double eta = 1.0;
  std::size_t l = static_cast<std::size_t>(start.step);
  for (std::size_t t = start.bag; t < rewards.size(); ++t) {
    for (; l < K; ++l) {
      total += eta * rewards[t][l];
      eta *= discounts[l];
    }
    l = 0;
  }
  return total;
}

Eigen::MatrixXd backup(const TabularPeriodicMdp& mdp, int k, const Eigen::VectorXd& v_next) {
  const int S = mdp.state_counts[k];
  const int A = mdp.action_counts[k];
  Eigen::VectorXd ev = mdp.transitions[mdp.next(k)] * v_next;  // row s*A + a
  Eigen::MatrixXd q(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) q(s, a) = mdp.reward_means[k](s, a) + mdp.discounts[k] * ev(s * A + a);
  return q;
}

namespace {

QFunctions zero_q(const TabularPeriodicMdp& mdp) {
  QFunctions q;
  for (int k = 0; k < mdp.K; ++k)
    q.tables.push_back(Eigen::MatrixXd::Zero(mdp.state_counts[k], mdp.action_counts[k]));
  return q;
}

void check_shape(const TabularPeriodicMdp& mdp, const QFunctions& q) {
  if (q.K() != mdp.K) throw ShapeError("Q has wrong number of steps");
  for (int k = 0; k < mdp.K; ++k)
    if (q.tables[k].rows() != mdp.state_counts[k] || q.tables[k].cols() != mdp.action_counts[k])
      throw ShapeError("Q table shape mismatch at " + step_name(k));
}

Eigen::VectorXd expected_value(const Eigen::MatrixXd& q, const Eigen::MatrixXd& pi) {
  return (q.array() * pi.array()).rowwise().sum();
}

// Gauss-Seidel backward sweeps. `value_of` turns Q_k into V_k (max or policy
// average). After a sweep only the K-1 equation can be violated, since every
// other step was just recomputed from the latest values.
template <class ValueOf>
QFunctions sweep_solve(const TabularPeriodicMdp& mdp, double tol, long max_sweeps,
                       const QFunctions* init, IterationTrace* trace, ValueOf value_of,
                       const char* what) {
  mdp.validate();
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  QFunctions q = init ? *init : zero_q(mdp);
  check_shape(mdp, q);
  const int K = mdp.K;
  double residual = std::numeric_limits<double>::infinity();
  for (long sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (int k = K - 1; k >= 0; --k) q.tables[k] = backup(mdp, k, value_of(q, mdp.next(k)));
    Eigen::MatrixXd fresh = backup(mdp, K - 1, value_of(q, 0));
    residual = (fresh - q.tables[K - 1]).cwiseAbs().maxCoeff();
    if (trace) {
      trace->residuals.push_back(residual);
      trace->sweeps = static_cast<int>(sweep);
    }
    if (!std::isfinite(residual)) throw NumericError(std::string(what) + " diverged");
    if (residual <= tol) return q;
  }
  std::ostringstream os;
  os << what << " did not converge in " << max_sweeps << " sweeps (residual " << residual << ")";
  throw ConvergenceError(os.str(), residual);
}

}  // namespace

QFunctions value_iteration(const TabularPeriodicMdp& mdp, double tol, long max_sweeps,
                           const QFunctions* init, IterationTrace* trace) {
  return sweep_solve(
      mdp, tol, max_sweeps, init, trace,
      [](const QFunctions& q, int k) { return q.values(k); }, "value iteration");
}

QFunctions evaluate_policy(const TabularPeriodicMdp& mdp, const PeriodicPolicy& policy,
                           double tol, long max_sweeps, IterationTrace* trace) {
  policy.validate();
  if (policy.probs.size() != static_cast<std::size_t>(mdp.K)) throw ShapeError("policy has wrong K");
  for (int k = 0; k < mdp.K; ++k)
    if (policy.probs[k].rows() != mdp.state_counts[k] ||
        policy.probs[k].cols() != mdp.action_counts[k])
      throw ShapeError("policy shape mismatch at " + step_name(k));
  return sweep_solve(
      mdp, tol, max_sweeps, nullptr, trace,
      [&](const QFunctions& q, int k) { return expected_value(q.tables[k], policy.probs[k]); },
      "policy evaluation");
}

std::vector<Eigen::VectorXd> policy_values(const QFunctions& q, const PeriodicPolicy& policy) {
  std::vector<Eigen::VectorXd> v;
  for (int k = 0; k < q.K(); ++k) v.push_back(expected_value(q.tables[k], policy.probs.at(k)));
  return v;
}

std::vector<std::vector<int>> greedy_actions(const QFunctions& q) {
  std::vector<std::vector<int>> out(q.tables.size());
  for (std::size_t k = 0; k < q.tables.size(); ++k) {
    const auto& Q = q.tables[k];
    out[k].resize(Q.rows());
    for (Eigen::Index s = 0; s < Q.rows(); ++s) {
      int best = 0;
      for (Eigen::Index a = 1; a < Q.cols(); ++a)
        if (Q(s, a) > Q(s, best)) best = static_cast<int>(a);
      out[k][s] = best;
    }
  }
  return out;
}

PeriodicPolicy greedy_policy(const QFunctions& q) {
  auto acts = greedy_actions(q);
  PeriodicPolicy pi;
  for (std::size_t k = 0; k < q.tables.size(); ++k) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(q.tables[k].rows(), q.tables[k].cols());
    for (std::size_t s = 0; s < acts[k].size(); ++s) P(s, acts[k][s]) = 1.0;
    pi.probs.push_back(std::move(P));
  }
  return pi;
}

double bellman_residual(const TabularPeriodicMdp& mdp, const QFunctions& q) {
  check_shape(mdp, q);
  double r = 0.0;
  for (int k = 0; k < mdp.K; ++k)
    r = std::max(r, (backup(mdp, k, q.values(mdp.next(k))) - q.tables[k]).cwiseAbs().maxCoeff());
  return r;
}

// JSON ----------------------------------------------------------------------

nlohmann::json to_json(const TabularPeriodicMdp& mdp) {
  nlohmann::json j;
  j["K"] = mdp.K;
  j["state_counts"] = mdp.state_counts;
  j["action_counts"] = mdp.action_counts;
  j["discounts"] = mdp.discounts;
  j["initial_dist"] = std::vector<double>(mdp.initial_dist.data(),
                                          mdp.initial_dist.data() + mdp.initial_dist.size());
  nlohmann::json trans = nlohmann::json::array();
  nlohmann::json rew = nlohmann::json::array();
  for (int k = 0; k < mdp.K; ++k) {
    int p = mdp.prev(k);
    nlohmann::json tk = nlohmann::json::array();
    for (int s = 0; s < mdp.state_counts[p]; ++s) {
      nlohmann::json ts = nlohmann::json::array();
      for (int a = 0; a < mdp.action_counts[p]; ++a) {
        const auto row = mdp.transitions[k].row(s * mdp.action_counts[p] + a);
        ts.push_back(std::vector<double>(row.begin(), row.end()));
      }
      tk.push_back(ts);
    }
    trans.push_back(tk);
    nlohmann::json rk = nlohmann::json::array();
    for (int s = 0; s < mdp.state_counts[k]; ++s) {
      const auto row = mdp.reward_means[k].row(s);
      rk.push_back(std::vector<double>(row.begin(), row.end()));
    }
    rew.push_back(rk);
  }
  j["transitions"] = trans;
  j["reward_means"] = rew;
  return j;
}

TabularPeriodicMdp mdp_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> keys = {"K",           "state_counts", "action_counts",
                                                "transitions", "reward_means", "discounts",
                                                "initial_dist"};
  if (!j.is_object()) throw ConfigError("MDP JSON must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw ConfigError("unknown MDP key: " + it.key());
  TabularPeriodicMdp mdp;
  try {
    mdp.K = j.at("K").get<int>();
    mdp.state_counts = j.at("state_counts").get<std::vector<int>>();
    mdp.action_counts = j.at("action_counts").get<std::vector<int>>();
    mdp.discounts = j.at("discounts").get<std::vector<double>>();
    auto init = j.at("initial_dist").get<std::vector<double>>();
    mdp.initial_dist = Eigen::Map<Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(init.size()));
    const auto& trans = j.at("transitions");
    const auto& rew = j.at("reward_means");
    if (mdp.K <= 0 || mdp.state_counts.size() != static_cast<std::size_t>(mdp.K) ||
        mdp.action_counts.size() != static_cast<std::size_t>(mdp.K) ||
        trans.size() != static_cast<std::size_t>(mdp.K) ||
        rew.size() != static_cast<std::size_t>(mdp.K))
      throw ShapeError("per-step arrays must all have length K");
    for (int k = 0; k < mdp.K; ++k) {
      int p = mdp.prev(k);
      int Sp = mdp.state_counts[p], Ap = mdp.action_counts[p], Sk = mdp.state_counts[k];
      Eigen::MatrixXd T(Sp * Ap, Sk);
      if (trans[k].size() != static_cast<std::size_t>(Sp))
        throw ShapeError("transitions shape mismatch at " + step_name(k));
      for (int s = 0; s < Sp; ++s) {
        if (trans[k][s].size() != static_cast<std::size_t>(Ap))
          throw ShapeError("transitions shape mismatch at " + step_name(k));
        for (int a = 0; a < Ap; ++a) {
          auto row = trans[k][s][a].get<std::vector<double>>();
          if (row.size() != static_cast<std::size_t>(Sk))
            throw ShapeError("transitions shape mismatch at " + step_name(k));
          for (int s2 = 0; s2 < Sk; ++s2) T(s * Ap + a, s2) = row[s2];
        }
      }
      mdp.transitions.push_back(std::move(T));
      Eigen::MatrixXd R(Sk, mdp.action_counts[k]);
      if (rew[k].size() != static_cast<std::size_t>(Sk))
        throw ShapeError("reward_means shape mismatch at " + step_name(k));
      for (int s = 0; s < Sk; ++s) {
        auto row = rew[k][s].get<std::vector<double>>();
        if (row.size() != static_cast<std::size_t>(mdp.action_counts[k]))
          throw ShapeError("reward_means shape mismatch at " + step_name(k));
        for (int a = 0; a < mdp.action_counts[k]; ++a) R(s, a) = row[a];
      }
      mdp.reward_means.push_back(std::move(R));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed MDP JSON: ") + e.what());
  }
  mdp.validate();
  return mdp;
}

TabularPeriodicMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return mdp_from_json(j);
}

void save_mdp(const TabularPeriodicMdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(mdp).dump(2) << "\n";
}

nlohmann::json to_json(const QFunctions& q) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& Q : q.tables) {
    nlohmann::json t = nlohmann::json::array();
    for (Eigen::Index s = 0; s < Q.rows(); ++s) {
      const auto row = Q.row(s);
      t.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j.push_back(t);
  }
  return j;
}

}  // namespace bagged_rl
