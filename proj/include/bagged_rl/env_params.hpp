#pragma once

#include <json.hpp>

#include <array>
#include <string>
#include <vector>

namespace bagged_rl {

enum class Var { C = 0, M = 1, E = 2, R = 3, O = 4 };
inline constexpr std::array<const char*, 5> kVarNames = {"C", "M", "E", "R", "O"};

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
  double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
};

struct Standardization {
  double shift = 0.0;
  double scale = 1.0;
  double to_standard(double raw) const { return (raw - shift) / scale; }
  double to_raw(double z) const { return z * scale + shift; }
};

struct InitialDist {
  double mean_E = 0.0, sd_E = 1.0;
  double mean_R = 0.0, sd_R = 1.0;
};

// Coefficients of the linear-Gaussian testbed. Index conventions follow the
// usual theta subscripts, so theta_E[0] is the intercept, theta_E[1] the
// autoregressive term, theta_E[1 + k] the main effect of A_k (k = 1..K), etc.
struct EnvParams {
  int K = 5;
  std::vector<double> theta_C{0.0};                // 1, or 3 with the (E,R) -> C arrows
  std::vector<std::vector<double>> theta_M;        // one shared 8-vector, or K vectors of length 7 + k
  std::vector<double> theta_E;                     // 2K + 2, or 2K + 3 with R -> E
  std::vector<double> theta_R;                     // K + 3, or 2K + 3 with A -> R
  std::vector<double> theta_O{0.0, 0.0};
  std::array<double, 5> noise_vars{1.0, 1.0, 1.0, 1.0, 1.0};
  std::array<Bounds, 5> truncation;
  std::array<Standardization, 5> standardization;
  bool clip_advantage_M = true;
  bool nonneg_constraints = false;
  InitialDist initial_dist;

  bool has_RC() const { return theta_C.size() == 3; }
  bool has_RE() const { return static_cast<int>(theta_E.size()) == 2 * K + 3; }
  bool has_AR() const { return static_cast<int>(theta_R.size()) == 2 * K + 3; }
  bool per_step_M() const { return theta_M.size() != 1; }
  // Coefficients used for step k (1-based).
  const std::vector<double>& theta_M_at(int k) const {
    return per_step_M() ? theta_M.at(static_cast<std::size_t>(k - 1)) : theta_M.at(0);
  }

  const Bounds& bounds(Var v) const { return truncation[static_cast<int>(v)]; }
  double noise_var(Var v) const { return noise_vars[static_cast<int>(v)]; }

  void validate() const;

  // Zero coefficients, unit noise, the default truncation and standardization
  // tables.
  static EnvParams zeros(int K = 5);
};

std::array<Bounds, 5> default_truncation();
std::array<Standardization, 5> default_standardization();

nlohmann::json to_json(const EnvParams& p);
EnvParams env_params_from_json(const nlohmann::json& j);
EnvParams load_env_params(const std::string& path);
void save_env_params(const EnvParams& p, const std::string& path);

}  // namespace bagged_rl
