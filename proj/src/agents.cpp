#include "bagged_rl/agents.hpp"

#include "bagged_rl/errors.hpp"

#include <algorithm>
#include <array>
#include <limits>

namespace bagged_rl {

namespace {

const std::array<std::pair<AgentKind, const char*>, 7> kAgentNames = {{
    {AgentKind::zero, "zero"},
    {AgentKind::rand, "rand"},
    {AgentKind::brlsvi, "brlsvi"},
    {AgentKind::brlsvi_stepwise, "brlsvi_stepwise"},
    {AgentKind::srlsvi, "srlsvi"},
    {AgentKind::rlsvi, "rlsvi"},
    {AgentKind::ts, "ts"},
}};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Regression rows whose targets depend on a weight vector for the next state:
// y = r + g * max_a next_a' beta, or y = r for rows without a next state.
class RowStore {
 public:
  void init(int p, int q) {
    p_ = p;
    q_ = q;
    gram_ = Eigen::MatrixXd::Zero(p, p);
  }

  void add(const Eigen::VectorXd& x, double r, double g, const Eigen::VectorXd* next0,
           const Eigen::VectorXd* next1) {
    x_.insert(x_.end(), x.data(), x.data() + p_);
    if (next0) {
      n0_.insert(n0_.end(), next0->data(), next0->data() + q_);
      n1_.insert(n1_.end(), next1->data(), next1->data() + q_);
    } else {
      n0_.insert(n0_.end(), static_cast<std::size_t>(q_), 0.0);
      n1_.insert(n1_.end(), static_cast<std::size_t>(q_), 0.0);
    }
    r_.push_back(r);
    g_.push_back(next0 ? g : 0.0);
    gram_.selfadjointView<Eigen::Lower>().rankUpdate(x);
    ++n_;
  }

  int rows() const { return n_; }
  int dim() const { return p_; }

  Eigen::VectorXd targets(const Eigen::VectorXd& beta_next) const {
    Eigen::VectorXd y(n_);
    if (n_ == 0) return y;
    Eigen::Map<const RowMat> N0(n0_.data(), n_, q_), N1(n1_.data(), n_, q_);
    Eigen::VectorXd v0 = N0 * beta_next, v1 = N1 * beta_next;
    for (int i = 0; i < n_; ++i) y(i) = r_[i] + g_[i] * std::max(v0(i), v1(i));
    return y;
  }

  Eigen::MatrixXd gram() const {
    Eigen::MatrixXd G = gram_.selfadjointView<Eigen::Lower>();
    return G;
  }

  Eigen::VectorXd xty(const Eigen::VectorXd& y) const {
    if (n_ == 0) return Eigen::VectorXd::Zero(p_);
    Eigen::Map<const RowMat> X(x_.data(), n_, p_);
    return X.transpose() * y;
  }

  StackedSystem system(const Eigen::VectorXd& beta_next) const {
    StackedSystem s;
    s.X = Eigen::Map<const RowMat>(x_.data(), n_, p_);
    s.Y = targets(beta_next);
    return s;
  }

 private:
  int p_ = 0, q_ = 0, n_ = 0;
  std::vector<double> x_, n0_, n1_, r_, g_;
  Eigen::MatrixXd gram_;
};

int greedy(double q0, double q1) { return q1 > q0 ? 1 : 0; }

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Context drawn uniformly from every context observed so far.
double sample_past_context(const ObservedHistory& h, Rng& rng) {
  std::size_t total = 0;
  for (const auto& b : h.bags()) total += b.C.size();
  if (total == 0) return 0.0;
  std::uniform_int_distribution<std::size_t> u(0, total - 1);
  std::size_t i = u(rng);
  for (const auto& b : h.bags()) {
    if (i < b.C.size()) return b.C[i];
    i -= b.C.size();
  }
  return 0.0;
}

}  // namespace

std::string to_string(AgentKind k) {
  for (const auto& [kind, name] : kAgentNames)
    if (kind == k) return name;
  return "unknown";
}

AgentKind agent_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kAgentNames)
    if (s == name) return kind;
  throw ConfigError("unknown agent kind: " + s);
}

void AgentConfig::validate() const {
  if (warmup_L < 1) throw ConfigError("warmup_L must be >= 1");
  if (!(gamma_bar >= 0.0 && gamma_bar < 1.0)) throw ConfigError("gamma_bar must lie in [0, 1)");
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  if (!(tau.c > 0.0)) throw ConfigError("tau must be positive");
}

AgentConfig AgentConfig::defaults(AgentKind kind) {
  AgentConfig c;
  c.kind = kind;
  c.name = to_string(kind);
  switch (kind) {
    case AgentKind::brlsvi:
    case AgentKind::brlsvi_stepwise:
      c.sigma2 = 0.005;
      c.tau = {5.0, true};
      break;
    case AgentKind::srlsvi:
      c.sigma2 = 1.0;
      c.tau = {10.0, false};
      break;
    case AgentKind::rlsvi:
      c.sigma2 = 0.005;
      c.tau = {2.0, true};
      break;
    case AgentKind::ts:
      c.sigma2 = 0.2;
      c.tau = {2.0, false};
      break;
    case AgentKind::zero:
    case AgentKind::rand:
      break;
  }
  return c;
}

nlohmann::json to_json(const AgentConfig& c) {
  nlohmann::json j{{"name", c.name},
                   {"kind", to_string(c.kind)},
                   {"warmup_L", c.warmup_L},
                   {"gamma_bar", c.gamma_bar},
                   {"sigma2", c.sigma2},
                   {"tau", {{"c", c.tau.c}, {"linear", c.tau.linear}}},
                   {"seed", c.seed},
                   {"sample_posterior", c.sample_posterior},
                   {"synthetic_first_context", c.synthetic_first_context}};
  if (c.kind == AgentKind::brlsvi) j["basis"] = to_string(c.basis);
  return j;
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("agent config must be an object");
  static const std::vector<std::string> keys = {
      "name",  "kind", "warmup_L", "gamma_bar",        "sigma2",
      "tau",   "seed", "basis",    "sample_posterior", "synthetic_first_context"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw ConfigError("unknown agent key: " + it.key());
  AgentConfig c;
  try {
    c = AgentConfig::defaults(agent_kind_from_string(j.at("kind").get<std::string>()));
    c.name = j.value("name", c.name);
    c.warmup_L = j.value("warmup_L", c.warmup_L);
    c.gamma_bar = j.value("gamma_bar", c.gamma_bar);
    c.sigma2 = j.value("sigma2", c.sigma2);
    if (j.contains("tau")) {
      const auto& t = j["tau"];
      if (t.is_number()) {
        c.tau = {t.get<double>(), false};
      } else {
        c.tau.c = t.at("c").get<double>();
        c.tau.linear = t.value("linear", false);
      }
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("basis")) c.basis = basis_kind_from_string(j["basis"].get<std::string>());
    c.sample_posterior = j.value("sample_posterior", c.sample_posterior);
    c.synthetic_first_context = j.value("synthetic_first_context", c.synthetic_first_context);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed agent config: ") + e.what());
  }
  c.validate();
  return c;
}

// Base protocol --------------------------------------------------------------

Agent::Agent(AgentConfig cfg, int K) : cfg_(std::move(cfg)), K_(K), rng_(cfg_.seed), hist_(K) {
  cfg_.validate();
}

void Agent::begin_bag(double prev_E, double prev_R) {
  hist_.begin_bag(prev_E, prev_R);
  ++d_;
  if (uses_warmup() && d_ > cfg_.warmup_L) plan(d_);
}

int Agent::act(double context) {
  hist_.observe_context(context);
  int a = (uses_warmup() && d_ <= cfg_.warmup_L) ? bernoulli(rng_, 0.5) : choose(hist_.current());
  hist_.record_action(a);
  return a;
}

void Agent::observe_mediator(double m) { hist_.observe_mediator(m); }

void Agent::end_bag(const BagRecord& outcome) {
  const BagRecord& mine = hist_.partial();
  if (!hist_.in_bag()) throw ProtocolError("end_bag called outside a bag");
  if (outcome.A != mine.A || outcome.C != mine.C || outcome.M != mine.M ||
      outcome.prev_E != mine.prev_E || outcome.prev_R != mine.prev_R)
    throw ProtocolError("bag outcome does not match this agent's observations and actions");
  hist_.end_bag(outcome.E, outcome.R, outcome.O);
  on_bag_end(hist_.completed() - 1);
}

void Agent::record(const BagRecord& bag) {
  if (static_cast<int>(bag.C.size()) != K_ || static_cast<int>(bag.A.size()) != K_ ||
      static_cast<int>(bag.M.size()) != K_)
    throw ShapeError("recorded bag must have K contexts, actions and mediators");
  begin_bag(bag.prev_E, bag.prev_R);
  for (int k = 0; k < K_; ++k) {
    int a = act(bag.C[k]);
    if (a != bag.A[k])
      throw ProtocolError("recorded action differs from this agent's own choice");
    observe_mediator(bag.M[k]);
  }
  end_bag(bag);
}

nlohmann::json Agent::trace() const {
  nlohmann::json j{{"agent", cfg_.name}, {"bag", d_}, {"rows", last_rows_}};
  if (last_post_) {
    j["mean"] = vec_json(last_post_->mean);
    j["cov_diag"] = vec_json(last_post_->covariance.diagonal());
  }
  return j;
}

StackedSystem Agent::last_system(int) const { return {}; }

// Simple policies ------------------------------------------------------------

namespace {

class ZeroAgent final : public Agent {
 public:
  using Agent::Agent;

 protected:
  int choose(const StepView&) override { return 0; }
  bool uses_warmup() const override { return false; }
};

class RandomAgent final : public Agent {
 public:
  using Agent::Agent;

 protected:
  int choose(const StepView&) override { return bernoulli(rng_, 0.5); }
  bool uses_warmup() const override { return false; }
};

// Pooled BRLSVI: one weight vector shared by all K steps; targets built with
// the previous bag's draw.
class PooledBrlsvi final : public Agent {
 public:
  PooledBrlsvi(AgentConfig cfg, int K) : Agent(std::move(cfg), K) {
    p_ = basis_dim(cfg_.basis, K);
    if (cfg_.basis == BasisKind::pooled && K != 5)
      throw UnsupportedError("the pooled basis is defined for K = 5 only");
    store_.init(p_, p_);
    beta_ = Eigen::VectorXd::Zero(p_);
  }

  std::vector<Eigen::VectorXd> weights() const override { return {beta_}; }
  StackedSystem last_system(int) const override { return last_sys_; }

 protected:
  void on_bag_end(std::size_t t) override {
    Eigen::VectorXd x(p_), n0(p_), n1(p_);
    for (int k = 1; k < K_; ++k) {
      StepView v = hist_.at(t, k), w = hist_.at(t, k + 1);
      fill_features(cfg_.basis, v, hist_.bags()[t].A[k - 1], x.data());
      fill_features(cfg_.basis, w, 0, n0.data());
      fill_features(cfg_.basis, w, 1, n1.data());
      store_.add(x, 0.0, 1.0, &n0, &n1);
    }
    if (t >= 1) add_terminal_row(t - 1, hist_.at(t, 1));
  }

  void plan(int d) override {
    const double lambda = cfg_.tau.at(d) / cfg_.sigma2;
    Eigen::VectorXd y = store_.targets(beta_);
    Eigen::MatrixXd G = store_.gram();
    Eigen::VectorXd b = store_.xty(y);
    last_rows_ = store_.rows();
    last_sys_ = store_.system(beta_);
    if (cfg_.synthetic_first_context && hist_.completed() >= 1) {
      const std::size_t t = hist_.completed() - 1;
      const BagRecord& last = hist_.bags()[t];
      BagRecord next;
      next.prev_E = last.E;
      next.prev_R = last.R;
      next.C = {sample_past_context(hist_, rng_)};
      StepView w = step_view(next, K_, 1);
      Eigen::VectorXd x = features(cfg_.basis, hist_.at(t, K_), last.A[K_ - 1]);
      double yq = last.R + cfg_.gamma_bar * std::max(features(cfg_.basis, w, 0).dot(beta_),
                                                     features(cfg_.basis, w, 1).dot(beta_));
      G += x * x.transpose();
      b += yq * x;
      ++last_rows_;
      last_sys_.X.conservativeResize(last_sys_.X.rows() + 1, Eigen::NoChange);
      last_sys_.X.row(last_sys_.X.rows() - 1) = x.transpose();
      last_sys_.Y.conservativeResize(last_sys_.Y.size() + 1);
      last_sys_.Y(last_sys_.Y.size() - 1) = yq;
    }
    last_post_ = posterior_from_moments(G, b, cfg_.sigma2, lambda);
    beta_ = cfg_.sample_posterior ? last_post_->sample(rng_) : last_post_->mean;
  }

  int choose(const StepView& v) override {
    xa_.resize(p_);
    fill_features(cfg_.basis, v, 0, xa_.data());
    const double q0 = xa_.dot(beta_);
    fill_features(cfg_.basis, v, 1, xa_.data());
    return greedy(q0, xa_.dot(beta_));
  }

 private:
  void add_terminal_row(std::size_t t, const StepView& next_first) {
    Eigen::VectorXd x(p_), n0(p_), n1(p_);
    fill_features(cfg_.basis, hist_.at(t, K_), hist_.bags()[t].A[K_ - 1], x.data());
    fill_features(cfg_.basis, next_first, 0, n0.data());
    fill_features(cfg_.basis, next_first, 1, n1.data());
    store_.add(x, hist_.bags()[t].R, cfg_.gamma_bar, &n0, &n1);
  }

  int p_;
  RowStore store_;
  Eigen::VectorXd beta_, xa_;
  StackedSystem last_sys_;
};

// Per-step learners on the step-k basis [1, E, R, M_{<k}, A_{<k}, C, a, aE, aR, aC].
// finite_horizon = false: Bagged RLSVI with per-step weights, where the step-K
// target bootstraps off the previous bag's step-1 draw.
// finite_horizon = true: RLSVI that treats each bag as a separate episode.
class StepwiseLearner final : public Agent {
 public:
  StepwiseLearner(AgentConfig cfg, int K, bool finite_horizon)
      : Agent(std::move(cfg), K), finite_(finite_horizon), store_(static_cast<std::size_t>(K)) {
    for (int k = 1; k <= K; ++k) {
      int q = k < K ? rlsvi_dim(k + 1) : rlsvi_dim(1);
      store_[k - 1].init(rlsvi_dim(k), q);
      beta_.push_back(Eigen::VectorXd::Zero(rlsvi_dim(k)));
    }
    last_sys_.resize(static_cast<std::size_t>(K));
  }

  std::vector<Eigen::VectorXd> weights() const override { return beta_; }
  StackedSystem last_system(int k) const override { return last_sys_.at(static_cast<std::size_t>(k)); }

  nlohmann::json trace() const override {
    nlohmann::json j = Agent::trace();
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& post : posts_)
      steps.push_back({{"mean", vec_json(post.mean)}, {"cov_diag", vec_json(post.covariance.diagonal())}});
    j["steps"] = steps;
    return j;
  }

 protected:
  void on_bag_end(std::size_t t) override {
    const BagRecord& bag = hist_.bags()[t];
    for (int k = 1; k < K_; ++k) {
      StepView v = hist_.at(t, k), w = hist_.at(t, k + 1);
      Eigen::VectorXd x = features_rlsvi(v, bag.A[k - 1]);
      Eigen::VectorXd n0 = features_rlsvi(w, 0), n1 = features_rlsvi(w, 1);
      store_[k - 1].add(x, 0.0, 1.0, &n0, &n1);
    }
    if (finite_) {
      store_[K_ - 1].add(features_rlsvi(hist_.at(t, K_), bag.A[K_ - 1]), bag.R, 0.0, nullptr, nullptr);
    } else if (t >= 1) {
      const BagRecord& prev = hist_.bags()[t - 1];
      StepView w = hist_.at(t, 1);
      Eigen::VectorXd x = features_rlsvi(hist_.at(t - 1, K_), prev.A[K_ - 1]);
      Eigen::VectorXd n0 = features_rlsvi(w, 0), n1 = features_rlsvi(w, 1);
      store_[K_ - 1].add(x, prev.R, cfg_.gamma_bar, &n0, &n1);
    }
  }

  void plan(int d) override {
    const double lambda = cfg_.tau.at(d) / cfg_.sigma2;
    std::vector<Eigen::VectorXd> fresh = beta_;
    posts_.clear();
    last_rows_ = 0;
    for (int k = K_; k >= 1; --k) {
      const auto& st = store_[k - 1];
      // Targets for k < K use this bag's fresh draw at k + 1 (per-step BRLSVI)
      // or the previous bag's draw (finite-horizon RLSVI). Step K bootstraps
      // off the previous bag's step-1 draw; RLSVI has no bootstrap there.
      Eigen::VectorXd next;
      if (k < K_)
        next = finite_ ? beta_[k] : fresh[k];
      else
        next = beta_[0];
      Eigen::VectorXd y = st.targets(next);
      last_sys_[k - 1] = st.system(next);
      GaussianPosterior post = posterior_from_moments(st.gram(), st.xty(y), cfg_.sigma2, lambda);
      fresh[k - 1] = cfg_.sample_posterior ? post.sample(rng_) : post.mean;
      last_rows_ += st.rows();
      posts_.insert(posts_.begin(), post);
    }
    beta_ = fresh;
    last_post_ = posts_.back();
  }

  int choose(const StepView& v) override {
    const auto& b = beta_[static_cast<std::size_t>(v.k - 1)];
    return greedy(features_rlsvi(v, 0).dot(b), features_rlsvi(v, 1).dot(b));
  }

 private:
  bool finite_;
  std::vector<RowStore> store_;
  std::vector<Eigen::VectorXd> beta_;
  std::vector<GaussianPosterior> posts_;
  std::vector<StackedSystem> last_sys_;
};

// Stationary RLSVI over whole bags: state (E_{d-1}, R_{d-1}) and 2^K bag actions.
class Srlsvi final : public Agent {
 public:
  Srlsvi(AgentConfig cfg, int K) : Agent(std::move(cfg), K) {
    if (K > 12) throw UnsupportedError("SRLSVI enumerates 2^K bag actions; K too large");
    p_ = srlsvi_dim(K);
    gram_ = Eigen::MatrixXd::Zero(p_, p_);
    beta_ = Eigen::VectorXd::Zero(p_);
  }

  std::vector<Eigen::VectorXd> weights() const override { return {beta_}; }
  int chosen_bag_action() const { return bag_action_; }

 protected:
  void on_bag_end(std::size_t t) override {
    const BagRecord& bag = hist_.bags()[t];
    Eigen::VectorXd x = features_srlsvi(bag.prev_E, bag.prev_R, bag_action_index(bag.A), K_);
    rows_.push_back(bag);
    gram_ += x * x.transpose();
  }

  void plan(int d) override {
    const double lambda = cfg_.tau.at(d) / cfg_.sigma2;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p_);
    StackedSystem sys;
    sys.X.resize(static_cast<Eigen::Index>(rows_.size()), p_);
    sys.Y.resize(static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const BagRecord& bag = rows_[i];
      Eigen::VectorXd x = features_srlsvi(bag.prev_E, bag.prev_R, bag_action_index(bag.A), K_);
      double y = bag.R + cfg_.gamma_bar * best_value(bag.E, bag.R).second;
      b += y * x;
      sys.X.row(static_cast<Eigen::Index>(i)) = x.transpose();
      sys.Y(static_cast<Eigen::Index>(i)) = y;
    }
    last_sys_ = std::move(sys);
    last_rows_ = static_cast<int>(rows_.size());
    last_post_ = posterior_from_moments(gram_, b, cfg_.sigma2, lambda);
    beta_ = cfg_.sample_posterior ? last_post_->sample(rng_) : last_post_->mean;
  }

  StackedSystem last_system(int) const override { return last_sys_; }

  int choose(const StepView& v) override {
    if (v.k == 1) bag_action_ = best_value(v.E_prev, v.R_prev).first;
    return bag_action_bits(bag_action_, K_)[static_cast<std::size_t>(v.k - 1)];
  }

 private:
  // (argmax bag action, max value) under the current weights; ties go to the
  // lowest index.
  std::pair<int, double> best_value(double E, double R) const {
    const double base = beta_(0) + beta_(1) * E + beta_(2) * R;
    int best = 0;
    double bv = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < (1 << K_); ++b) {
      double v = beta_(3 + 3 * b) + beta_(4 + 3 * b) * E + beta_(5 + 3 * b) * R;
      if (v > bv) {
        bv = v;
        best = b;
      }
    }
    return {best, base + bv};
  }

  int p_;
  int bag_action_ = 0;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd beta_;
  std::vector<BagRecord> rows_;
  StackedSystem last_sys_;
};

// Thompson sampling on the proximal outcome M with the 8-dim basis; refit once
// per bag.
class ThompsonAgent final : public Agent {
 public:
  ThompsonAgent(AgentConfig cfg, int K) : Agent(std::move(cfg), K) {
    gram_ = Eigen::MatrixXd::Zero(kTsDim, kTsDim);
    xty_ = Eigen::VectorXd::Zero(kTsDim);
  }

  std::vector<Eigen::VectorXd> weights() const override {
    if (last_post_) return {last_post_->mean};
    return {Eigen::VectorXd::Zero(kTsDim)};
  }

 protected:
  void on_bag_end(std::size_t t) override {
    const BagRecord& bag = hist_.bags()[t];
    for (int k = 1; k <= K_; ++k) {
      Eigen::VectorXd x = features_ts(hist_.at(t, k), bag.A[k - 1]);
      gram_ += x * x.transpose();
      xty_ += bag.M[k - 1] * x;
    }
  }

  void plan(int d) override {
    last_post_ = posterior_from_moments(gram_, xty_, cfg_.sigma2, cfg_.tau.at(d) / cfg_.sigma2);
    last_rows_ = static_cast<int>(hist_.completed()) * K_;
  }

  int choose(const StepView& v) override {
    Eigen::Vector4d x(1.0, v.E_prev, v.R_prev, v.context());
    return bernoulli(rng_, ts_prob(*last_post_, x));
  }

 private:
  Eigen::MatrixXd gram_;
  Eigen::VectorXd xty_;
};

}  // namespace

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, int K) {
  switch (cfg.kind) {
    case AgentKind::zero: return std::make_unique<ZeroAgent>(cfg, K);
    case AgentKind::rand: return std::make_unique<RandomAgent>(cfg, K);
    case AgentKind::brlsvi: return std::make_unique<PooledBrlsvi>(cfg, K);
    case AgentKind::brlsvi_stepwise: return std::make_unique<StepwiseLearner>(cfg, K, false);
    case AgentKind::rlsvi: return std::make_unique<StepwiseLearner>(cfg, K, true);
    case AgentKind::srlsvi: return std::make_unique<Srlsvi>(cfg, K);
    case AgentKind::ts: return std::make_unique<ThompsonAgent>(cfg, K);
  }
  throw ConfigError("unknown agent kind");
}

}  // namespace bagged_rl
