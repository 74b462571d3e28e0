#pragma once

#include "bagged_rl/env_params.hpp"
#include "bagged_rl/history.hpp"
#include "bagged_rl/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bagged_rl {

// Additive noise for one bag: 2K + 3 values drawn as C_1..C_K, M_1..M_K, E, R, O.
struct BagNoise {
  std::vector<double> C, M;
  double E = 0.0, R = 0.0, O = 0.0;

  static BagNoise zero(int K);
  std::vector<double> flat() const;
  static BagNoise from_flat(const std::vector<double>& v, int K);
};

BagNoise draw_bag_noise(const EnvParams& p, Rng& rng);

// Steps through one bag: context() gives C_k, act(a) returns M_k, finish()
// produces E, R, O. The same (params, prev state, actions, noise) always gives
// the same bag regardless of the bag index.
class BagStepper {
 public:
  BagStepper(const EnvParams& p, double prev_E, double prev_R, BagNoise noise);

  int step() const { return k_; }  // 1-based, K + 1 once all actions are taken
  bool done() const { return k_ > p_->K; }
  double context() const;
  double act(int a);
  BagRecord finish() const;

 private:
  const EnvParams* p_;
  BagNoise noise_;
  BagRecord rec_;
  int k_ = 1;
};

BagRecord step_bag(const EnvParams& p, double prev_E, double prev_R,
                   const std::vector<int>& actions, const BagNoise& noise);
BagRecord step_bag(const EnvParams& p, double prev_E, double prev_R,
                   const std::vector<int>& actions, Rng& rng);

// Variants ------------------------------------------------------------------

enum class VariantKind {
  vanilla,
  enhance_MR,
  enhance_AER,
  enhance_both,
  add_RE,
  add_AR,
  add_RC,
  interaction_MA
};

std::string to_string(VariantKind k);
VariantKind variant_kind_from_string(const std::string& s);

// coefficients: add_RE takes 1 value (theta_E[2K+2]); add_AR takes K values
// (theta_R[K+3..2K+2], before division by scale_divisor); add_RC takes 2
// (theta_C[1..2]); interaction_MA takes K(K-1)/2 values ordered
// (k=2,j=1), (k=3,j=1), (k=3,j=2), ...
struct VariantSpec {
  VariantKind kind = VariantKind::vanilla;
  double xi = 0.0;
  double scale_divisor = 1.0;
  std::vector<double> coefficients;
  // enhance_both applies this MR shift before the AER shift by xi.
  double mr_shift = 0.03;
};

nlohmann::json to_json(const VariantSpec& v);
VariantSpec variant_spec_from_json(const nlohmann::json& j);

struct VariantResult {
  EnvParams params;
  double scale = 1.0;  // fraction of the requested shift / added effect kept
  int halvings = 0;
};

EnvParams make_variant(const EnvParams& p, const VariantSpec& spec);
VariantResult make_variant_detailed(const EnvParams& p, const VariantSpec& spec);

// Stationarity ----------------------------------------------------------------

// Bag-to-bag recursion [R_d; E_d] = phi + Phi [R_{d-1}; E_{d-1}] for a fixed
// action pattern, ignoring noise, clipping and truncation.
struct VarForm {
  Eigen::Matrix2d Phi;
  Eigen::Vector2d phi;
};

VarForm var_form(const EnvParams& p, const std::vector<int>& actions, double mean_C);

struct StationarityReport {
  std::array<double, 2> eigenvalues{};  // moduli
  bool stationary = false;
  Eigen::Matrix2d Phi;
};

StationarityReport check_stationarity(const Eigen::Matrix2d& Phi);
StationarityReport check_stationarity(const EnvParams& p, int action_pattern);
bool stationary_under_both(const EnvParams& p);

// Stationary mean (alpha_R, alpha_E) = (I - Phi)^{-1} phi.
std::array<double, 2> limiting_mean(const EnvParams& p, const std::vector<int>& actions,
                                    double mean_C);

// Episodes and STE ------------------------------------------------------------

using StepPolicy = std::function<int(const StepView&)>;

std::array<double, 2> draw_initial_state(const EnvParams& p, Rng& rng);  // (E_0, R_0)

BagTrajectory simulate_episode(const EnvParams& p, int horizon, std::uint64_t seed,
                               const StepPolicy& policy);
double total_reward(const BagTrajectory& traj);

struct SteReport {
  double ste = 0.0;
  double mean_star = 0.0, mean_zero = 0.0, sd_zero = 0.0;
};

SteReport estimate_ste_detailed(const EnvParams& p, const StepPolicy& policy_star,
                                int n_episodes, int horizon, std::uint64_t seed);
double estimate_ste(const EnvParams& p, const StepPolicy& policy_star, int n_episodes,
                    int horizon, std::uint64_t seed);

}  // namespace bagged_rl
