#include "bagged_rl/oracle.hpp"

#include "bagged_rl/errors.hpp"

#include <cmath>
#include <limits>

namespace bagged_rl {

namespace {

constexpr double kPolicyGuard = 1e6;
constexpr double kTieTol = 1e-9;

// Step offsets into the stacked state vector.
std::vector<int> offsets(const TabularPeriodicMdp& mdp) {
  std::vector<int> off{0};
  for (int k = 0; k < mdp.K; ++k) off.push_back(off.back() + mdp.state_counts[k]);
  return off;
}

std::vector<Eigen::VectorXd> split(const TabularPeriodicMdp& mdp, const Eigen::VectorXd& v) {
  auto off = offsets(mdp);
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k < mdp.K; ++k) out.push_back(v.segment(off[k], mdp.state_counts[k]));
  return out;
}

std::vector<Eigen::VectorXd> evaluate_truncated(const TabularPeriodicMdp& mdp,
                                                const std::vector<std::vector<int>>& act, int bags) {
  const int K = mdp.K;
  std::vector<Eigen::VectorXd> v(static_cast<std::size_t>(K));
  Eigen::VectorXd next = Eigen::VectorXd::Zero(mdp.state_counts[0]);
  for (int b = 0; b < bags; ++b) {
    for (int k = K - 1; k >= 0; --k) {
      const Eigen::MatrixXd q = backup(mdp, k, next);
      Eigen::VectorXd cur(mdp.state_counts[k]);
      for (int s = 0; s < mdp.state_counts[k]; ++s) cur(s) = q(s, act[k][s]);
      v[k] = cur;
      next = cur;
    }
  }
  return v;
}

}  // namespace

std::vector<Eigen::VectorXd> evaluate_exact(const TabularPeriodicMdp& mdp,
                                            const std::vector<std::vector<int>>& act) {
  const int K = mdp.K;
  auto off = offsets(mdp);
  const int n = off.back();
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r(n);
  for (int k = 0; k < K; ++k) {
    const int kn = mdp.next(k);
    const Eigen::MatrixXd& T = mdp.transitions[kn];
    const int A = mdp.action_counts[k];
    for (int s = 0; s < mdp.state_counts[k]; ++s) {
      const int a = act[k][s];
      r(off[k] + s) = mdp.reward_means[k](s, a);
      M.block(off[k] + s, off[kn], 1, mdp.state_counts[kn]) -= mdp.discounts[k] * T.row(s * A + a);
    }
  }
  return split(mdp, M.partialPivLu().solve(r));
}

EnumerationResult enumerate_optimal(const TabularPeriodicMdp& mdp, int truncation_bags) {
  mdp.validate();
  if (truncation_bags < 0) throw ConfigError("truncation_bags must be nonnegative");
  double count = 1.0;
  for (int k = 0; k < mdp.K; ++k) count *= std::pow(mdp.action_counts[k], mdp.state_counts[k]);
  if (count > kPolicyGuard) throw SizeError("too many deterministic policies to enumerate");

  std::vector<std::vector<int>> act(static_cast<std::size_t>(mdp.K));
  for (int k = 0; k < mdp.K; ++k) act[k].assign(static_cast<std::size_t>(mdp.state_counts[k]), 0);

  EnumerationResult res;
  double best_total = -std::numeric_limits<double>::infinity();
  for (;;) {
    auto v = truncation_bags > 0 ? evaluate_truncated(mdp, act, truncation_bags) : evaluate_exact(mdp, act);
    ++res.policies;
    double total = 0.0;
    for (const auto& x : v) total += x.sum();
    if (res.values.empty()) {
      res.values = v;
    } else {
      for (int k = 0; k < mdp.K; ++k) res.values[k] = res.values[k].cwiseMax(v[k]);
    }
    if (total > best_total + 1e-12) {
      best_total = total;
      res.policy = act;
    }
    // Odometer over all (k, s) action choices.
    int k = 0;
    std::size_t s = 0;
    for (;;) {
      if (k == mdp.K) break;
      if (++act[k][s] < mdp.action_counts[k]) break;
      act[k][s] = 0;
      if (++s == act[k].size()) {
        s = 0;
        ++k;
      }
    }
    if (k == mdp.K) break;
  }
  res.initial_values = res.values[0];
  return res;
}

TabularPeriodicMdp random_mdp(Rng& rng, int K, int max_states, int actions, double gamma_bar) {
  if (K < 1 || max_states < 1 || actions < 1) throw ConfigError("random_mdp needs positive sizes");
  if (!(gamma_bar >= 0.0 && gamma_bar < 1.0)) throw ConfigError("gamma_bar must lie in [0, 1)");
  std::uniform_int_distribution<int> ns(1, max_states);
  std::uniform_real_distribution<double> u01(0.0, 1.0), ur(-1.0, 1.0);
  TabularPeriodicMdp m;
  m.K = K;
  for (int k = 0; k < K; ++k) {
    m.state_counts.push_back(ns(rng));
    m.action_counts.push_back(actions);
  }
  m.transitions.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const int p = m.prev(k);
    Eigen::MatrixXd T(m.state_counts[p] * actions, m.state_counts[k]);
    for (Eigen::Index r = 0; r < T.rows(); ++r) {
      for (Eigen::Index c = 0; c < T.cols(); ++c) T(r, c) = u01(rng) + 1e-3;
      T.row(r) /= T.row(r).sum();
    }
    m.transitions[k] = T;
    Eigen::MatrixXd R(m.state_counts[k], actions);
    for (Eigen::Index s = 0; s < R.rows(); ++s)
      for (Eigen::Index a = 0; a < R.cols(); ++a) R(s, a) = ur(rng);
    m.reward_means.push_back(R);
  }
  std::vector<double> w;
  double total = 0.0;
  for (int k = 0; k < K; ++k) total += w.emplace_back(u01(rng) + 0.1);
  for (int k = 0; k < K; ++k) m.discounts.push_back(std::pow(gamma_bar, w[k] / total));
  if (gamma_bar == 0.0) m.discounts.assign(static_cast<std::size_t>(K), 0.0);
  m.initial_dist = Eigen::VectorXd(m.state_counts[0]);
  for (Eigen::Index s = 0; s < m.initial_dist.size(); ++s) m.initial_dist(s) = u01(rng) + 1e-3;
  m.initial_dist /= m.initial_dist.sum();
  m.validate();
  return m;
}

GapReport theorem2_gap(const DiscreteDagEnv& env, DagStateKind fine, DagStateKind coarse, double gamma_bar) {
  return theorem2_gap(env, coords(fine), coords(coarse), gamma_bar);
}

GapReport theorem2_gap(const DiscreteDagEnv& env, const StateCoords& fine, const StateCoords& coarse,
                       double gamma_bar) {
  if ((coarse.M && !fine.M) || (coarse.N && !fine.N) || (coarse.A && !fine.A) || (coarse.C && !fine.C))
    throw ConfigError("coarse state is not a function of the fine state");
  CompiledMdp F = compile_dag_to_mdp(env, fine, gamma_bar);
  CompiledMdp U = compile_dag_to_mdp(env, coarse, gamma_bar);
  const QFunctions qf = value_iteration(F.mdp, 1e-12);
  const QFunctions qu = value_iteration(U.mdp, 1e-12);

  GapReport rep;
  rep.initial_fine = F.mdp.initial_dist.dot(qf.values(0));
  rep.initial_coarse = U.mdp.initial_dist.dot(qu.values(0));
  for (int k = 0; k < env.K; ++k) {
    const Eigen::MatrixXd mass = joint_state_mass(env, fine, coarse, k);
    const Eigen::MatrixXd& Qf = qf.tables[k];
    const Eigen::VectorXd Vf = Qf.rowwise().maxCoeff();
    const Eigen::VectorXd Vu = qu.values(k);
    for (Eigen::Index u = 0; u < mass.cols(); ++u) {
      GapRow row;
      row.k = k;
      row.u = static_cast<int>(u);
      row.label = U.spaces[k].label(row.u);
      row.mass = mass.col(u).sum();
      row.v_coarse = Vu(u);
      if (row.mass > 0.0) {
        const Eigen::VectorXd p = mass.col(u) / row.mass;
        row.v_fine = p.dot(Vf);
        const Eigen::RowVectorXd avgQ = p.transpose() * Qf;
        row.jensen = row.v_fine - avgQ.maxCoeff();
        row.condition_holds = true;
        for (Eigen::Index a = 0; a < Qf.cols(); ++a) {
          double optimal_mass = 0.0;
          for (Eigen::Index f = 0; f < Qf.rows(); ++f)
            if (p(f) > 0.0 && Qf(f, a) >= Vf(f) - kTieTol) optimal_mass += p(f);
          if (optimal_mass >= 1.0 - 1e-12) row.condition_holds = false;
        }
      } else {
        row.v_fine = row.v_coarse;
      }
      row.gap = row.v_fine - row.v_coarse;
      row.propagated = row.gap - row.jensen;
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

nlohmann::json to_json(const GapReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"k", x.k},
                    {"u", x.u},
                    {"label", x.label},
                    {"mass", x.mass},
                    {"v_fine", x.v_fine},
                    {"v_coarse", x.v_coarse},
                    {"gap", x.gap},
                    {"jensen", x.jensen},
                    {"propagated", x.propagated},
                    {"condition_holds", x.condition_holds}});
  return {{"rows", rows}, {"initial_fine", r.initial_fine}, {"initial_coarse", r.initial_coarse}};
}

}  // namespace bagged_rl
