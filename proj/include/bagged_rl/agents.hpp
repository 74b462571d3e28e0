#pragma once

#include "bagged_rl/features.hpp"
#include "bagged_rl/history.hpp"
#include "bagged_rl/posterior.hpp"
#include "bagged_rl/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bagged_rl {

enum class AgentKind { zero, rand, brlsvi, brlsvi_stepwise, srlsvi, rlsvi, ts };

std::string to_string(AgentKind k);
AgentKind agent_kind_from_string(const std::string& s);

// tau_d = c * d when linear, else c.
struct TauSchedule {
  double c = 1.0;
  bool linear = false;
  double at(int d) const { return linear ? c * d : c; }
};

struct AgentConfig {
  std::string name;
  AgentKind kind = AgentKind::rand;
  int warmup_L = 7;
  double gamma_bar = 0.99;
  double sigma2 = 1.0;
  TauSchedule tau;
  std::uint64_t seed = 0;
  BasisKind basis = BasisKind::pooled;  // brlsvi only
  bool sample_posterior = true;         // false: act on the posterior mean
  bool synthetic_first_context = false;

  void validate() const;
  // Hyperparameters used for each learner unless overridden.
  static AgentConfig defaults(AgentKind kind);
};

nlohmann::json to_json(const AgentConfig& c);
// Missing fields fall back to AgentConfig::defaults(kind).
AgentConfig agent_config_from_json(const nlohmann::json& j);

// Stacked regression (X, Y) behind the latest posterior.
struct StackedSystem {
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;
};

// Online protocol for one bag:
//   begin_bag(E_{d-1}, R_{d-1}); for k in 1..K { a = act(C_k); observe_mediator(M_k); }
//   end_bag(outcome)
// Planning for bag d happens inside begin_bag once d > warmup_L.
class Agent {
 public:
  Agent(AgentConfig cfg, int K);
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  void begin_bag(double prev_E, double prev_R);
  int act(double context);
  void observe_mediator(double m);
  // The outcome's contexts, actions and mediators must be the ones this agent
  // saw and chose; anything else is a protocol error.
  void end_bag(const BagRecord& outcome);
  // Replays a complete recorded bag through the protocol. The agent's own
  // action choices must reproduce the recorded actions.
  void record(const BagRecord& bag);

  const AgentConfig& config() const { return cfg_; }
  const ObservedHistory& history() const { return hist_; }
  int K() const { return K_; }
  int current_bag() const { return d_; }  // 1-based, 0 before the first bag
  bool warming_up() const { return d_ <= cfg_.warmup_L; }

  // Diagnostics of the latest plan.
  int last_plan_rows() const { return last_rows_; }
  const std::optional<GaussianPosterior>& last_posterior() const { return last_post_; }
  virtual nlohmann::json trace() const;
  // Weight vector(s) the agent currently acts on (one per step for the
  // per-step learners).
  virtual std::vector<Eigen::VectorXd> weights() const { return {}; }
  // Regression of the latest plan; k is the zero-based step for per-step
  // learners and ignored otherwise.
  virtual StackedSystem last_system(int k = 0) const;

 protected:
  virtual void plan(int /*d*/) {}
  virtual int choose(const StepView& v) = 0;
  virtual void on_bag_end(std::size_t /*t*/) {}
  virtual bool uses_warmup() const { return true; }

  AgentConfig cfg_;
  int K_;
  Rng rng_;
  ObservedHistory hist_;
  int d_ = 0;
  int last_rows_ = 0;
  std::optional<GaussianPosterior> last_post_;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, int K);

}  // namespace bagged_rl
