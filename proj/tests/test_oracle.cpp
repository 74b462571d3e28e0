#include "bagged_rl/dag_env.hpp"
#include "bagged_rl/errors.hpp"
#include "bagged_rl/oracle.hpp"
#include "bagged_rl/periodic_mdp.hpp"

#include <doctest.h>

#include <cmath>

using namespace bagged_rl;

namespace {

const std::string kData = BAGGED_RL_DATA_DIR;

// Brute-force S'' quantities at the last step of a K = 2 env without the
// misspecification arrows. Returns (reward mean, P(E' = e2, R' = r2)).
std::pair<double, double> spp_last_step(const DiscreteDagEnv& env, int e, int r, int a1, int a2, int e2, int r2) {
  double reward = 0.0, prob = 0.0;
  for (int c1 = 0; c1 < env.nC; ++c1)
    for (int m1 = 0; m1 < env.nM; ++m1)
      for (int n1 = 0; n1 < env.nN; ++n1)
        for (int c2 = 0; c2 < env.nC; ++c2)
          for (int m2 = 0; m2 < env.nM; ++m2)
            for (int n2 = 0; n2 < env.nN; ++n2)
              for (int en = 0; en < env.nE; ++en)
                for (int rn = 0; rn < env.nR; ++rn) {
                  const auto mi = [&](int c, int a) { return static_cast<std::size_t>(((e * env.nR + r) * env.nC + c) * 2 + a); };
                  double p = env.C(0, c1) * env.M[0](mi(c1, a1), m1) * env.N[0](static_cast<std::size_t>(e * 2 + a1), n1) *
                             env.C(0, c2) * env.M[1](mi(c2, a2), m2) * env.N[1](static_cast<std::size_t>(e * 2 + a2), n2);
                  p *= env.E(static_cast<std::size_t>((e * env.nN + n1) * env.nN + n2), en);
                  p *= env.R(static_cast<std::size_t>(((r * env.nM + m1) * env.nM + m2) * env.nE + en), rn);
                  reward += p * env.r_values[static_cast<std::size_t>(rn)];
                  if (en == e2 && rn == r2) prob += p;
                }
  return {reward, prob};
}

// Every R row equal, so R is independent of its parents.
DiscreteDagEnv with_flat_reward(DiscreteDagEnv env) {
  for (std::size_t i = 0; i < env.R.rows(); ++i)
    for (int v = 0; v < env.nR; ++v) env.R.at(i, v) = env.R(0, v);
  return env;
}

// M no longer matters for R: every M pattern uses the M = 0 row.
DiscreteDagEnv with_irrelevant_mediator(DiscreteDagEnv env) {
  const int K = env.K;
  std::size_t mpat = 1;
  for (int k = 0; k < K; ++k) mpat *= static_cast<std::size_t>(env.nM);
  for (int r = 0; r < env.nR; ++r)
    for (std::size_t m = 0; m < mpat; ++m)
      for (int e = 0; e < env.nE; ++e)
        for (int v = 0; v < env.nR; ++v) {
          const std::size_t row = (static_cast<std::size_t>(r) * mpat + m) * static_cast<std::size_t>(env.nE) + static_cast<std::size_t>(e);
          const std::size_t base = (static_cast<std::size_t>(r) * mpat) * static_cast<std::size_t>(env.nE) + static_cast<std::size_t>(e);
          env.R.at(row, v) = env.R(base, v);
        }
  return env;
}

}  // namespace

TEST_CASE("enumeration on the one-state example") {
  TabularPeriodicMdp m;
  m.K = 1;
  m.state_counts = {1};
  m.action_counts = {2};
  m.transitions = {Eigen::MatrixXd::Ones(2, 1)};
  Eigen::MatrixXd r(1, 2);
  r << 0.0, 1.0;
  m.reward_means = {r};
  m.discounts = {0.5};
  m.initial_dist = Eigen::VectorXd::Ones(1);
  const auto e = enumerate_optimal(m);
  CHECK(e.initial_values(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(e.policy[0][0] == 1);
  CHECK(e.policies == 2);

  m.reward_means[0].setZero();
  const auto z = enumerate_optimal(m);
  CHECK(z.initial_values(0) == 0.0);
  CHECK(z.policy[0][0] == 0);
}

TEST_CASE("enumeration size guard") {
  Rng rng(1);
  const auto m = random_mdp(rng, 2, 3, 2, 0.5);
  CHECK_NOTHROW(enumerate_optimal(m));
  TabularPeriodicMdp big;
  big.K = 1;
  big.state_counts = {21};
  big.action_counts = {2};
  big.transitions = {Eigen::MatrixXd::Constant(42, 21, 1.0 / 21)};
  big.reward_means = {Eigen::MatrixXd::Zero(21, 2)};
  big.discounts = {0.5};
  big.initial_dist = Eigen::VectorXd::Constant(21, 1.0 / 21);
  CHECK_THROWS_AS(enumerate_optimal(big), SizeError);
}

TEST_CASE("truncated evaluation approaches the exact value") {
  Rng rng(2);
  const auto m = random_mdp(rng, 2, 3, 2, 0.5);
  const auto exact = enumerate_optimal(m);
  const auto trunc = enumerate_optimal(m, 80);
  for (int k = 0; k < 2; ++k) CHECK((exact.values[k] - trunc.values[k]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random mdp construction") {
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto m = random_mdp(rng, 3, 3, 2, 0.6);
    CHECK(m.gamma_bar() == doctest::Approx(0.6).epsilon(1e-12));
    for (int k = 0; k < 3; ++k) CHECK((m.state_counts[k] >= 1 && m.state_counts[k] <= 3));
  }
  CHECK_THROWS_AS(random_mdp(rng, 2, 2, 2, 1.0), ConfigError);
}

TEST_CASE("exact evaluation solves the policy equations") {
  Rng rng(4);
  const auto m = random_mdp(rng, 2, 3, 2, 0.8);
  std::vector<std::vector<int>> act(2);
  for (int k = 0; k < 2; ++k) act[k].assign(static_cast<std::size_t>(m.state_counts[k]), 1);
  const auto v = evaluate_exact(m, act);
  const auto q = evaluate_policy(m, PeriodicPolicy::deterministic(m, act), 1e-12);
  for (int k = 0; k < 2; ++k)
    for (int s = 0; s < m.state_counts[k]; ++s) CHECK(std::abs(v[k](s) - q.tables[k](s, 1)) < 1e-10);
}

TEST_CASE("dag env json round trip and validation") {
  Rng rng(5);
  const auto env = random_dag_env(rng, {true, true, true});
  const auto back = dag_env_from_json(to_json(env));
  CHECK(back.R.table == env.R.table);
  CHECK(back.E.table == env.E.table);
  CHECK(back.M[1].table == env.M[1].table);
  CHECK(back.flag_RC);
  auto j = to_json(env);
  j["extra"] = 0;
  CHECK_THROWS_AS(dag_env_from_json(j), ConfigError);
  j = to_json(env);
  j["cpt"]["C"] = nlohmann::json::array({0.5});
  CHECK_THROWS(dag_env_from_json(j));
}

TEST_CASE("random CPT entries are strictly interior") {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const auto env = random_dag_env(rng);
    env.validate();
    std::vector<const Cpt*> all{&env.C, &env.E, &env.R};
    for (const auto& c : env.M) all.push_back(&c);
    for (const auto& c : env.N) all.push_back(&c);
    for (const Cpt* c : all)
      for (double x : c->table) CHECK((x >= 0.05 && x <= 0.95));
    CHECK((env.nE >= 2 && env.nE <= 3));
  }
}

TEST_CASE("flat reward gives equal reward means for every state kind") {
  Rng rng(7);
  const auto env = with_flat_reward(random_dag_env(rng));
  for (auto kind : {DagStateKind::S, DagStateKind::S_prime, DagStateKind::S_doubleprime}) {
    const auto c = compile_dag_to_mdp(env, kind, 0.9);
    const auto& R = c.mdp.reward_means[1];
    CHECK(R.maxCoeff() - R.minCoeff() < 1e-12);
    CHECK(c.mdp.reward_means[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(c.mdp.discounts == std::vector<double>{1.0, 0.9});
  }
}

TEST_CASE("S'' marginalization matches a hand enumeration") {
  Rng rng(8);
  for (int rep = 0; rep < 3; ++rep) {
    const auto env = random_dag_env(rng);
    const auto c = compile_dag_to_mdp(env, DagStateKind::S_doubleprime, 0.9);
    for (int e = 0; e < env.nE; ++e)
      for (int r = 0; r < env.nR; ++r)
        for (int a1 = 0; a1 < 2; ++a1)
          for (int a2 = 0; a2 < 2; ++a2) {
            const int s = (e * env.nR + r) * 2 + a1;
            CHECK(std::abs(c.mdp.reward_means[1](s, a2) - spp_last_step(env, e, r, a1, a2, 0, 0).first) < 1e-12);
            for (int e2 = 0; e2 < env.nE; ++e2)
              for (int r2 = 0; r2 < env.nR; ++r2)
                CHECK(std::abs(c.mdp.transitions[0](s * 2 + a2, e2 * env.nR + r2) -
                               spp_last_step(env, e, r, a1, a2, e2, r2).second) < 1e-12);
          }
  }
}

TEST_CASE("S is finer than S''") {
  Rng rng(9);
  const auto env = random_dag_env(rng);
  const auto s = compile_dag_to_mdp(env, DagStateKind::S, 0.9);
  const auto spp = compile_dag_to_mdp(env, DagStateKind::S_doubleprime, 0.9);
  CHECK(s.mdp.state_counts[0] > spp.mdp.state_counts[0]);
  CHECK(s.mdp.state_counts[1] > spp.mdp.state_counts[1]);
  CHECK(spp.spaces[1].label(0) == "E=0,R=0,A1=0");
}

TEST_CASE("a state that drops needed history is rejected") {
  bool thrown = false;
  for (std::uint64_t seed = 0; seed < 10 && !thrown; ++seed) {
    Rng rng(seed);
    const auto env = random_dag_env(rng);
    try {
      compile_dag_to_mdp(env, StateCoords{false, false, false, true}, 0.9);
    } catch (const NonMarkovError& e) {
      thrown = true;
      CHECK(e.step() >= 0);
      CHECK(e.action() >= 0);
    }
  }
  CHECK(thrown);
}

TEST_CASE("identity abstraction has zero gap") {
  Rng rng(10);
  const auto env = random_dag_env(rng);
  for (auto kind : {DagStateKind::S, DagStateKind::S_prime, DagStateKind::S_doubleprime}) {
    const auto rep = theorem2_gap(env, kind, kind, 0.9);
    for (const auto& row : rep.rows) CHECK(std::abs(row.gap) < 1e-10);
    CHECK(std::abs(rep.initial_fine - rep.initial_coarse) < 1e-10);
  }
  CHECK_THROWS_AS(theorem2_gap(env, DagStateKind::S_doubleprime, DagStateKind::S_prime, 0.9), ConfigError);
  CHECK_THROWS_AS(theorem2_gap(env, DagStateKind::S, DagStateKind::S_prime, 0.9), ConfigError);
}

TEST_CASE("ordering and the decomposition on random instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const auto env = random_dag_env(rng);
    const auto rep = theorem2_gap(env, DagStateKind::S_prime, DagStateKind::S_doubleprime, 0.9);
    CHECK(rep.initial_coarse <= rep.initial_fine + 1e-10);
    for (const auto& row : rep.rows) {
      CHECK(row.gap >= -1e-10);
      CHECK(row.jensen >= -1e-10);
      CHECK(row.propagated >= -1e-10);
      CHECK((row.jensen > 1e-8) == row.condition_holds);
    }
  }
}

TEST_CASE("mediator that does not reach R gives zero gap") {
  Rng rng(11);
  const auto env = with_irrelevant_mediator(random_dag_env(rng));
  const auto rep = theorem2_gap(env, DagStateKind::S_prime, DagStateKind::S_doubleprime, 0.9);
  // C and M still drive nothing that matters, so the coarse state loses nothing
  for (const auto& row : rep.rows) CHECK(std::abs(row.gap) < 1e-9);
  CHECK(std::abs(rep.initial_fine - rep.initial_coarse) < 1e-9);
}

TEST_CASE("redundant coordinate keeps the initial value") {
  // past actions only act through M and N, which S already holds
  Rng rng(12);
  const auto env = random_dag_env(rng);
  const StateCoords fine{true, true, true, true};
  const auto rep = theorem2_gap(env, fine, coords(DagStateKind::S), 0.9);
  CHECK(std::abs(rep.initial_fine - rep.initial_coarse) < 1e-10);
  for (const auto& row : rep.rows) CHECK(std::abs(row.gap) < 1e-10);
}

TEST_CASE("split-optimum instance") {
  const auto env = load_dag_env(kData + "/split_optimum.json");
  const auto rep = theorem2_gap(env, DagStateKind::S_prime, DagStateKind::S_doubleprime, 0.9);
  CHECK(rep.initial_fine - rep.initial_coarse > 1e-3);
  for (const auto& row : rep.rows) {
    CHECK(row.gap > 1e-8);
    CHECK(row.condition_holds);
  }
  const auto j = to_json(rep);
  CHECK(j["rows"].size() == rep.rows.size());
}

TEST_CASE("joint state mass is a distribution") {
  Rng rng(13);
  const auto env = random_dag_env(rng);
  for (int k = 0; k < env.K; ++k) {
    const auto m = joint_state_mass(env, coords(DagStateKind::S_prime), coords(DagStateKind::S_doubleprime), k);
    CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.minCoeff() >= 0.0);
  }
}
