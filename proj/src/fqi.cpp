#include "bagged_rl/fqi.hpp"

#include "bagged_rl/errors.hpp"
#include "bagged_rl/rng.hpp"

#include <cmath>
#include <vector>

namespace bagged_rl {

namespace {

constexpr int kChunk = 4096;

struct Pass {
  Eigen::MatrixXd B;  // sum of x (g * phi(s', a*))'
  std::vector<std::uint8_t> choices;
};

// Regenerates the random-action data set and streams its rows. The data are
// never stored: each pass re-simulates the same seeded episodes.
class Dataset {
 public:
  Dataset(const EnvParams& p, const FqiConfig& cfg)
      : p_(p), cfg_(cfg), dim_(basis_dim(cfg.basis, p.K)) {}

  int dim() const { return dim_; }

  // Accumulates A = X'X and c = X'r when `moments` is set, and always the
  // bootstrap cross-moment B for greedy next actions under beta.
  Pass run(const Eigen::VectorXd& beta, Eigen::MatrixXd* A, Eigen::VectorXd* c) const {
    const int p = dim_, K = p_.K;
    Pass out;
    out.B = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd X(kChunk, p), Z(kChunk, p);
    Eigen::VectorXd r(kChunk);
    int fill = 0;
    auto flush = [&]() {
      if (fill == 0) return;
      auto Xs = X.topRows(fill);
      out.B.noalias() += Xs.transpose() * Z.topRows(fill);
      if (A) A->noalias() += Xs.transpose() * Xs;
      if (c) c->noalias() += Xs.transpose() * r.head(fill);
      fill = 0;
    };
    Eigen::VectorXd x(p), z0(p), z1(p);
    const std::uint64_t env_tag = fnv1a("fqi-env"), act_tag = fnv1a("fqi-act");
    for (int e = 0; e < cfg_.episodes; ++e) {
      Rng act_rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(e), 0, 0, act_tag));
      StepPolicy random = [&act_rng](const StepView&) { return bernoulli(act_rng, 0.5); };
      BagTrajectory traj = simulate_episode(
          p_, cfg_.horizon, derive_seed(cfg_.seed, static_cast<std::uint64_t>(e), 0, 0, env_tag), random);
      const std::size_t D = traj.bags.size();
      for (std::size_t t = 0; t < D; ++t) {
        const BagRecord& bag = traj.bags[t];
        for (int k = 1; k <= K; ++k) {
          if (k == K && t + 1 == D) continue;
          StepView v = step_view(bag, K, k);
          StepView w = k < K ? step_view(bag, K, k + 1) : step_view(traj.bags[t + 1], K, 1);
          const double g = k < K ? 1.0 : cfg_.gamma_bar;
          fill_features(cfg_.basis, v, bag.A[k - 1], x.data());
          fill_features(cfg_.basis, w, 0, z0.data());
          fill_features(cfg_.basis, w, 1, z1.data());
          const bool one = z1.dot(beta) > z0.dot(beta);
          out.choices.push_back(one ? 1 : 0);
          X.row(fill) = x.transpose();
          Z.row(fill) = g * (one ? z1 : z0).transpose();
          r(fill) = k < K ? 0.0 : bag.R;
          if (++fill == kChunk) flush();
        }
      }
    }
    flush();
    return out;
  }

 private:
  const EnvParams& p_;
  const FqiConfig& cfg_;
  int dim_;
};

}  // namespace

FqiResult fitted_q_iteration(const EnvParams& p, const FqiConfig& cfg) {
  if (cfg.episodes < 1 || cfg.horizon < 2) throw ConfigError("FQI needs episodes >= 1 and horizon >= 2");
  if (!(cfg.gamma_bar >= 0.0 && cfg.gamma_bar < 1.0)) throw ConfigError("gamma_bar must lie in [0, 1)");
  if (cfg.basis == BasisKind::pooled && p.K != 5)
    throw UnsupportedError("the pooled basis is defined for K = 5 only");
  Dataset data(p, cfg);
  const int dim = data.dim();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd Areg;
  Eigen::LDLT<Eigen::MatrixXd> plain;
  std::vector<std::uint8_t> prev;
  FqiResult res;
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    Pass pass = data.run(beta, it == 1 ? &A : nullptr, it == 1 ? &c : nullptr);
    if (it == 1) {
      Areg = A;
      Areg.diagonal().array() += cfg.ridge;
      plain.compute(Areg);
      res.rows = static_cast<long>(pass.choices.size());
    }
    long changed = 0;
    if (prev.empty()) {
      changed = static_cast<long>(pass.choices.size());
    } else {
      for (std::size_t i = 0; i < prev.size(); ++i) changed += prev[i] != pass.choices[i];
    }
    // One plain FQI step from beta, to report how far beta is from a fixed point.
    Eigen::VectorXd step = plain.solve(c + pass.B * beta);
    res.fixed_point_gap = (step - beta).cwiseAbs().maxCoeff();
    res.iterations = it;
    res.changed_last = changed;
    if (it > 1 && changed == 0) {
      res.converged = true;
      break;
    }
    // Least-squares fixed point with the greedy next actions held fixed.
    Eigen::MatrixXd M = Areg - pass.B;
    beta = M.partialPivLu().solve(c);
    if (!beta.allFinite()) throw NumericError("FQI solve produced non-finite weights");
    prev = std::move(pass.choices);
  }
  res.beta = beta;
  return res;
}

StepPolicy greedy_step_policy(BasisKind basis, Eigen::VectorXd beta) {
  return [basis, beta = std::move(beta)](const StepView& v) {
    Eigen::VectorXd x(beta.size());
    fill_features(basis, v, 0, x.data());
    const double q0 = x.dot(beta);
    fill_features(basis, v, 1, x.data());
    return x.dot(beta) > q0 ? 1 : 0;
  };
}

}  // namespace bagged_rl
