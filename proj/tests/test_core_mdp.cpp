#include "bagged_rl/errors.hpp"
#include "bagged_rl/oracle.hpp"
#include "bagged_rl/periodic_mdp.hpp"
#include "bagged_rl/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace bagged_rl;

namespace {

TabularPeriodicMdp one_state(double gamma) {
  TabularPeriodicMdp m;
  m.K = 1;
  m.state_counts = {1};
  m.action_counts = {2};
  m.transitions = {Eigen::MatrixXd::Ones(2, 1)};
  Eigen::MatrixXd r(1, 2);
  r << 0.0, 1.0;
  m.reward_means = {r};
  m.discounts = {gamma};
  m.initial_dist = Eigen::VectorXd::Ones(1);
  return m;
}

TabularPeriodicMdp zero_rewards(TabularPeriodicMdp m) {
  for (auto& r : m.reward_means) r.setZero();
  return m;
}

double max_abs_diff(const QFunctions& a, const QFunctions& b) {
  double d = 0.0;
  for (int k = 0; k < a.K(); ++k) d = std::max(d, (a.tables[k] - b.tables[k]).cwiseAbs().maxCoeff());
  return d;
}

// Random stochastic policy
PeriodicPolicy random_policy(const TabularPeriodicMdp& m, Rng& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  PeriodicPolicy p;
  for (int k = 0; k < m.K; ++k) {
    Eigen::MatrixXd P(m.state_counts[k], m.action_counts[k]);
    for (Eigen::Index s = 0; s < P.rows(); ++s) {
      for (Eigen::Index a = 0; a < P.cols(); ++a) P(s, a) = u(rng);
      P.row(s) /= P.row(s).sum();
    }
    p.probs.push_back(P);
  }
  return p;
}

}  // namespace

TEST_CASE("discounted_return hand examples") {
  CHECK(discounted_return({{0, 0}, {0, 0}}, {0.3, 0.7}, {0, 0}) == 0.0);
  CHECK(discounted_return({{0, 1}, {0, 1}}, {1.0, 0.5}, {0, 0}) == doctest::Approx(1.5).epsilon(1e-15));

  std::vector<std::vector<double>> r(2000, std::vector<double>{0, 0, 0, 0, 1});
  const double v = discounted_return(r, {1, 1, 1, 1, 0.99}, {0, 0});
  CHECK(v == doctest::Approx((1 - std::pow(0.99, 2000)) / 0.01).epsilon(1e-12));
  CHECK(v == doctest::Approx(100.0).epsilon(1e-6));

  CHECK_THROWS_AS(discounted_return(r, {1, 1, 1, 1, 0.99}, {2000, 0}), std::out_of_range);
  CHECK_THROWS_AS(discounted_return(r, {1, 1, 1, 1, 0.99}, {0, 5}), std::out_of_range);
}

TEST_CASE("discounted_return mid-bag start") {
  // start at (0, 1): R01 + g1 R10 + g1 g0 R11
  const double v = discounted_return({{5, 1}, {2, 3}}, {0.5, 0.25}, {0, 1});
  CHECK(v == doctest::Approx(1 + 0.25 * 2 + 0.25 * 0.5 * 3));
}

TEST_CASE("bagged reward embedding is bag discounting") {
  Rng rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int D = 1 + rep % 40;
    std::vector<std::vector<double>> r(D, std::vector<double>(5, 0.0));
    double direct = 0.0, w = 1.0;
    for (int d = 0; d < D; ++d) {
      r[d][4] = n(rng);
      direct += w * r[d][4];
      w *= 0.99;
    }
    CHECK(std::abs(discounted_return(r, {1, 1, 1, 1, 0.99}, {0, 0}) - direct) < 1e-12);
  }
}

TEST_CASE("value_iteration on the one-state example") {
  const auto m = one_state(0.5);
  const auto q = value_iteration(m, 1e-12);
  CHECK(q.tables[0](0, 1) == doctest::Approx(2.0).epsilon(1e-11));
  CHECK(q.tables[0](0, 0) == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(greedy_actions(q)[0][0] == 1);
  CHECK(bellman_residual(m, q) <= 1e-12);

  QFunctions zero{{Eigen::MatrixXd::Zero(1, 2)}};
  CHECK(bellman_residual(m, zero) == doctest::Approx(1.0));
}

TEST_CASE("zero rewards give zero Q everywhere") {
  Rng rng(3);
  const auto m = zero_rewards(random_mdp(rng, 3, 3, 2, 0.9));
  const auto q = value_iteration(m);
  for (const auto& t : q.tables) CHECK(t.cwiseAbs().maxCoeff() == 0.0);
  const auto qp = evaluate_policy(m, PeriodicPolicy::uniform(m));
  for (const auto& t : qp.tables) CHECK(t.cwiseAbs().maxCoeff() == 0.0);
  CHECK(bellman_residual(m, q) == 0.0);
}

TEST_CASE("value_iteration agrees with enumeration") {
  const double tol = 1e-10;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const auto m = random_mdp(rng, 2, 2, 2, 0.5);
    const auto q = value_iteration(m, tol);
    const auto e = enumerate_optimal(m);
    for (int k = 0; k < 2; ++k)
      CHECK((q.values(k) - e.values[k]).cwiseAbs().maxCoeff() <= 2 * tol / (1 - 0.5));
  }
}

TEST_CASE("greedy policy value equals optimal value") {
  Rng rng(5);
  const double tol = 1e-10;
  const auto m = random_mdp(rng, 3, 3, 3, 0.8);
  const auto q = value_iteration(m, tol);
  const auto pi = greedy_policy(q);
  const auto qp = evaluate_policy(m, pi, tol);
  const auto v = policy_values(qp, pi);
  for (int k = 0; k < m.K; ++k) CHECK((v[k] - q.values(k)).cwiseAbs().maxCoeff() <= 2 * tol / (1 - 0.8));
}

TEST_CASE("uniform policy value matches Monte Carlo rollouts") {
  Rng rng(8);
  const auto m = random_mdp(rng, 2, 2, 2, 0.5);
  const auto pi = PeriodicPolicy::uniform(m);
  const auto v = policy_values(evaluate_policy(m, pi, 1e-12), pi);
  const double exact = m.initial_dist.dot(v[0]);

  // 60 bags is far past 0.5^60
  Rng sim(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](const Eigen::RowVectorXd& p) {
    double x = u(sim), c = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if ((c += p(i)) > x) return static_cast<int>(i);
    return static_cast<int>(p.size() - 1);
  };
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int ep = 0; ep < n; ++ep) {
    int s = draw(m.initial_dist.transpose());
    double g = 1.0, ret = 0.0;
    for (int t = 0; t < 120; ++t) {
      const int k = t % 2;
      const int a = draw(pi.probs[k].row(s));
      ret += g * m.reward_means[k](s, a);
      g *= m.discounts[k];
      const int kn = m.next(k);
      s = draw(m.transitions[kn].row(s * m.action_counts[k] + a));
    }
    sum += ret;
    sum2 += ret * ret;
  }
  const double mean = sum / n, se = std::sqrt((sum2 / n - mean * mean) / n);
  CHECK(std::abs(mean - exact) < 3 * se);
}

TEST_CASE("greedy tie-break and linear scan") {
  QFunctions q{{Eigen::MatrixXd::Ones(1, 2)}};
  CHECK(greedy_actions(q)[0][0] == 0);
  CHECK(greedy_policy(q).probs[0](0, 0) == 1.0);

  Rng rng(21);
  std::uniform_int_distribution<int> small(-2, 2);
  Eigen::MatrixXd t(50, 4);
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = small(rng);
  const auto acts = greedy_actions(QFunctions{{t}});
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < 4; ++j)
      if (t(i, j) > t(i, best)) best = j;
    CHECK(acts[0][static_cast<std::size_t>(i)] == best);
  }
}

TEST_CASE("fixed point does not depend on the start") {
  Rng rng(13);
  const double tol = 1e-10;
  const auto m = random_mdp(rng, 3, 3, 2, 0.9);
  QFunctions init;
  std::normal_distribution<double> n(0.0, 50.0);
  for (int k = 0; k < m.K; ++k) {
    Eigen::MatrixXd t(m.state_counts[k], 2);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = n(rng);
    init.tables.push_back(t);
  }
  const auto a = value_iteration(m, tol);
  const auto b = value_iteration(m, tol, 1000000, &init);
  CHECK(max_abs_diff(a, b) <= 2 * tol / (1 - 0.9));
}

TEST_CASE("optimal policy dominates random policies") {
  const double tol = 1e-10;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const auto m = random_mdp(rng, 1 + static_cast<int>(seed % 3), 3, 2, 0.7);
    const auto q = value_iteration(m, tol);
    for (int trial = 0; trial < 3; ++trial) {
      const auto pi = random_policy(m, rng);
      const auto v = policy_values(evaluate_policy(m, pi, tol), pi);
      for (int k = 0; k < m.K; ++k) CHECK((q.values(k) - v[k]).minCoeff() >= -2 * tol);
    }
  }
}

TEST_CASE("residual is non-increasing over sweeps") {
  Rng rng(17);
  const auto m = random_mdp(rng, 3, 3, 2, 0.95);
  IterationTrace tr;
  value_iteration(m, 1e-10, 1000000, nullptr, &tr);
  REQUIRE(tr.residuals.size() > 2);
  for (std::size_t i = 1; i < tr.residuals.size(); ++i) CHECK(tr.residuals[i] <= tr.residuals[i - 1] + 1e-12);
}

TEST_CASE("non-convergence raises with the residual") {
  Rng rng(2);
  const auto m = random_mdp(rng, 2, 3, 2, 0.99);
  try {
    value_iteration(m, 1e-12, 3);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > 1e-12);
  }
}

TEST_CASE("mdp validation") {
  auto m = one_state(1.0);
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = one_state(0.0);
  CHECK_NOTHROW(m.validate());
  CHECK(value_iteration(m).tables[0](0, 1) == 1.0);
  m.transitions[0](0, 0) = 0.9;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = one_state(0.5);
  m.initial_dist(0) = 0.5;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = one_state(0.5);
  m.reward_means[0] = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(m.validate(), ShapeError);
}

TEST_CASE("mdp json round trip") {
  Rng rng(4);
  const auto m = random_mdp(rng, 3, 3, 2, 0.9);
  const auto j = to_json(m);
  for (const char* key : {"K", "state_counts", "action_counts", "transitions", "reward_means", "discounts",
                          "initial_dist"})
    CHECK(j.contains(key));
  const auto back = mdp_from_json(j);
  CHECK(max_abs_diff(value_iteration(m), value_iteration(back)) == 0.0);
  auto bad = j;
  bad["extra"] = 1;
  CHECK_THROWS_AS(mdp_from_json(bad), ConfigError);
}
