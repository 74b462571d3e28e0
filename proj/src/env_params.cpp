#include "bagged_rl/env_params.hpp"

#include "bagged_rl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>

namespace bagged_rl {

std::array<Bounds, 5> default_truncation() {
  return {Bounds{-2.575, 1.714}, Bounds{-2.259, 1.684}, Bounds{-1.439, 3.349},
          Bounds{-2.285, 4.042}, Bounds{-0.851, 7.230}};
}

// R has no raw scale of its own (it is built already standardized).
std::array<Standardization, 5> default_standardization() {
  return {Standardization{4.686, 2.089}, Standardization{4.456, 2.279},
          Standardization{2.178, 1.514}, Standardization{0.0, 1.0},
          Standardization{1.685, 1.980}};
}

EnvParams EnvParams::zeros(int K) {
  EnvParams p;
  p.K = K;
  p.theta_C = {0.0};
  p.theta_M = {std::vector<double>(8, 0.0)};
  p.theta_E.assign(static_cast<std::size_t>(2 * K + 2), 0.0);
  p.theta_R.assign(static_cast<std::size_t>(K + 3), 0.0);
  p.theta_O = {0.0, 0.0};
  p.truncation = default_truncation();
  p.standardization = default_standardization();
  return p;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void EnvParams::validate() const {
  if (K < 1) throw ConfigError("K must be positive");
  if (theta_C.size() != 1 && theta_C.size() != 3)
    throw ConfigError("theta_C must have 1 or 3 entries");
  if (theta_M.size() == 1) {
    if (theta_M[0].size() != 8) throw ConfigError("theta_M must have 8 entries");
  } else if (static_cast<int>(theta_M.size()) == K) {
    for (int k = 1; k <= K; ++k)
      if (static_cast<int>(theta_M[k - 1].size()) != 7 + k)
        throw ConfigError("per-step theta_M vector " + std::to_string(k) + " must have " +
                          std::to_string(7 + k) + " entries");
  } else {
    throw ConfigError("theta_M must be one 8-vector or K per-step vectors");
  }
  int nE = static_cast<int>(theta_E.size());
  if (nE != 2 * K + 2 && nE != 2 * K + 3)
    throw ConfigError("theta_E must have 2K+2 or 2K+3 entries");
  int nR = static_cast<int>(theta_R.size());
  if (nR != K + 3 && nR != 2 * K + 3) throw ConfigError("theta_R must have K+3 or 2K+3 entries");
  if (theta_O.size() != 2) throw ConfigError("theta_O must have 2 entries");
  bool finite = all_finite(theta_C) && all_finite(theta_E) && all_finite(theta_R) &&
                all_finite(theta_O);
  for (const auto& m : theta_M) finite = finite && all_finite(m);
  if (!finite) throw ConfigError("non-finite coefficient");
  for (int v = 0; v < 5; ++v) {
    if (!(noise_vars[v] >= 0.0)) throw ConfigError(std::string("noise variance for ") +
                                                   kVarNames[v] + " must be >= 0");
    if (!(truncation[v].lo < truncation[v].hi))
      throw ConfigError(std::string("truncation lower >= upper for ") + kVarNames[v]);
    if (!(standardization[v].scale > 0.0))
      throw ConfigError(std::string("standardization scale must be positive for ") + kVarNames[v]);
  }
  if (!(initial_dist.sd_E >= 0.0) || !(initial_dist.sd_R >= 0.0))
    throw ConfigError("initial_dist sd must be >= 0");
  if (nonneg_constraints) {
    for (int k = 1; k <= K; ++k)
      if (theta_R[k] < 0.0) throw ConfigError("nonneg_constraints: theta_R[1..K] must be >= 0");
    for (int k = 1; k <= K; ++k) {
      const auto& m = theta_M_at(k);
      if (m[1] < 0.0 || m[2] < 0.0)
        throw ConfigError("nonneg_constraints: theta_M[1..2] must be >= 0");
    }
  }
}

nlohmann::json to_json(const EnvParams& p) {
  nlohmann::json j;
  j["K"] = p.K;
  j["theta_C"] = p.theta_C;
  if (p.per_step_M())
    j["theta_M"] = p.theta_M;
  else
    j["theta_M"] = p.theta_M.at(0);
  j["theta_E"] = p.theta_E;
  j["theta_R"] = p.theta_R;
  j["theta_O"] = p.theta_O;
  nlohmann::json nv, tr, st;
  for (int v = 0; v < 5; ++v) {
    nv[kVarNames[v]] = p.noise_vars[v];
    tr[kVarNames[v]] = {p.truncation[v].lo, p.truncation[v].hi};
    st[kVarNames[v]] = {p.standardization[v].shift, p.standardization[v].scale};
  }
  j["noise_vars"] = nv;
  j["truncation"] = tr;
  j["standardization"] = st;
  j["clip_advantage_M"] = p.clip_advantage_M;
  j["nonneg_constraints"] = p.nonneg_constraints;
  j["initial_dist"] = {{"mean_E", p.initial_dist.mean_E},
                       {"sd_E", p.initial_dist.sd_E},
                       {"mean_R", p.initial_dist.mean_R},
                       {"sd_R", p.initial_dist.sd_R}};
  return j;
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key in " + where + ": " + it.key());
  }
}

}  // namespace

EnvParams env_params_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"K", "theta_C", "theta_M", "theta_E", "theta_R", "theta_O", "noise_vars",
                  "truncation", "standardization", "clip_advantage_M", "nonneg_constraints",
                  "initial_dist"},
                 "EnvParams");
  EnvParams p = EnvParams::zeros(j.value("K", 5));
  try {
    p.theta_C = j.at("theta_C").get<std::vector<double>>();
    const auto& m = j.at("theta_M");
    if (!m.is_array() || m.empty()) throw ConfigError("theta_M must be a non-empty array");
    if (m[0].is_array())
      p.theta_M = m.get<std::vector<std::vector<double>>>();
    else
      p.theta_M = {m.get<std::vector<double>>()};
    p.theta_E = j.at("theta_E").get<std::vector<double>>();
    p.theta_R = j.at("theta_R").get<std::vector<double>>();
    p.theta_O = j.at("theta_O").get<std::vector<double>>();
    if (j.contains("noise_vars")) {
      const auto& nv = j["noise_vars"];
      reject_unknown(nv, {"C", "M", "E", "R", "O"}, "noise_vars");
      for (int v = 0; v < 5; ++v)
        if (nv.contains(kVarNames[v])) p.noise_vars[v] = nv[kVarNames[v]].get<double>();
    }
    if (j.contains("truncation")) {
      const auto& tr = j["truncation"];
      reject_unknown(tr, {"C", "M", "E", "R", "O"}, "truncation");
      for (int v = 0; v < 5; ++v)
        if (tr.contains(kVarNames[v])) {
          auto b = tr[kVarNames[v]].get<std::vector<double>>();
          if (b.size() != 2) throw ConfigError("truncation entries must be [lower, upper]");
          p.truncation[v] = {b[0], b[1]};
        }
    }
    if (j.contains("standardization")) {
      const auto& st = j["standardization"];
      reject_unknown(st, {"C", "M", "E", "R", "O"}, "standardization");
      for (int v = 0; v < 5; ++v)
        if (st.contains(kVarNames[v])) {
          auto b = st[kVarNames[v]].get<std::vector<double>>();
          if (b.size() != 2) throw ConfigError("standardization entries must be [shift, scale]");
          p.standardization[v] = {b[0], b[1]};
        }
    }
    p.clip_advantage_M = j.value("clip_advantage_M", true);
    p.nonneg_constraints = j.value("nonneg_constraints", false);
    if (j.contains("initial_dist")) {
      const auto& d = j["initial_dist"];
      reject_unknown(d, {"mean_E", "sd_E", "mean_R", "sd_R"}, "initial_dist");
      p.initial_dist.mean_E = d.value("mean_E", 0.0);
      p.initial_dist.sd_E = d.value("sd_E", 1.0);
      p.initial_dist.mean_R = d.value("mean_R", 0.0);
      p.initial_dist.sd_R = d.value("sd_R", 1.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed EnvParams: ") + e.what());
  }
  p.validate();
  return p;
}

EnvParams load_env_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return env_params_from_json(j);
}

void save_env_params(const EnvParams& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(p).dump(2) << "\n";
}

}  // namespace bagged_rl
