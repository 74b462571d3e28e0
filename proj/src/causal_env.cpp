#include "bagged_rl/causal_env.hpp"

#include "bagged_rl/errors.hpp"

#include <cmath>
#include <complex>

namespace bagged_rl {

BagNoise BagNoise::zero(int K) {
  BagNoise n;
  n.C.assign(static_cast<std::size_t>(K), 0.0);
  n.M.assign(static_cast<std::size_t>(K), 0.0);
  return n;
}

std::vector<double> BagNoise::flat() const {
  std::vector<double> v(C);
  v.insert(v.end(), M.begin(), M.end());
  v.push_back(E);
  v.push_back(R);
  v.push_back(O);
  return v;
}

BagNoise BagNoise::from_flat(const std::vector<double>& v, int K) {
  if (static_cast<int>(v.size()) != 2 * K + 3)
    throw ShapeError("bag noise must have 2K+3 entries");
  BagNoise n;
  n.C.assign(v.begin(), v.begin() + K);
  n.M.assign(v.begin() + K, v.begin() + 2 * K);
  n.E = v[2 * K];
  n.R = v[2 * K + 1];
  n.O = v[2 * K + 2];
  return n;
}

BagNoise draw_bag_noise(const EnvParams& p, Rng& rng) {
  BagNoise n;
  const double sC = std::sqrt(p.noise_var(Var::C));
  const double sM = std::sqrt(p.noise_var(Var::M));
  n.C.resize(static_cast<std::size_t>(p.K));
  n.M.resize(static_cast<std::size_t>(p.K));
  for (int k = 0; k < p.K; ++k) n.C[k] = sC * std_normal(rng);
  for (int k = 0; k < p.K; ++k) n.M[k] = sM * std_normal(rng);
  n.E = std::sqrt(p.noise_var(Var::E)) * std_normal(rng);
  n.R = std::sqrt(p.noise_var(Var::R)) * std_normal(rng);
  n.O = std::sqrt(p.noise_var(Var::O)) * std_normal(rng);
  return n;
}

BagStepper::BagStepper(const EnvParams& p, double prev_E, double prev_R, BagNoise noise)
    : p_(&p), noise_(std::move(noise)) {
  if (static_cast<int>(noise_.C.size()) != p.K || static_cast<int>(noise_.M.size()) != p.K)
    throw ShapeError("bag noise does not match K");
  rec_.prev_E = prev_E;
  rec_.prev_R = prev_R;
  rec_.C.resize(static_cast<std::size_t>(p.K));
  const auto& tc = p.theta_C;
  for (int k = 0; k < p.K; ++k) {
    double c = tc[0] + noise_.C[k];
    if (p.has_RC()) c += tc[1] * prev_E + tc[2] * prev_R;
    rec_.C[k] = p.bounds(Var::C).clamp(c);
  }
}

double BagStepper::context() const {
  if (done()) throw ProtocolError("bag already has K actions");
  return rec_.C[static_cast<std::size_t>(k_ - 1)];
}

double BagStepper::act(int a) {
  if (done()) throw ProtocolError("bag already has K actions");
  if (a != 0 && a != 1) throw ShapeError("actions are binary");
  const auto& th = p_->theta_M_at(k_);
  const double E = rec_.prev_E, R = rec_.prev_R, C = rec_.C[static_cast<std::size_t>(k_ - 1)];
  double base = th[0] + th[1] * E + th[2] * R + th[3] * C;
  double adv = th[4] + th[5] * E + th[6] * R + th[7] * C;
  for (int j = 1; j < k_ && j + 7 < static_cast<int>(th.size()); ++j)
    adv += th[7 + j] * rec_.M[static_cast<std::size_t>(j - 1)];
  if (p_->clip_advantage_M) adv = std::max(0.0, adv);
  double m = p_->bounds(Var::M).clamp(base + a * adv + noise_.M[static_cast<std::size_t>(k_ - 1)]);
  rec_.A.push_back(a);
  rec_.M.push_back(m);
  ++k_;
  return m;
}

BagRecord BagStepper::finish() const {
  if (!done()) throw ProtocolError("bag finished before all K actions were taken");
  const EnvParams& p = *p_;
  const int K = p.K;
  BagRecord out = rec_;
  const double Ep = rec_.prev_E, Rp = rec_.prev_R;
  const auto& tE = p.theta_E;
  double e = tE[0] + tE[1] * Ep;
  for (int k = 1; k <= K; ++k) {
    const int a = rec_.A[static_cast<std::size_t>(k - 1)];
    e += tE[static_cast<std::size_t>(k + 1)] * a + tE[static_cast<std::size_t>(K + 1 + k)] * a * Ep;
  }
  if (p.has_RE()) e += tE[static_cast<std::size_t>(2 * K + 2)] * Rp;
  out.E = p.bounds(Var::E).clamp(e + noise_.E);

  const auto& tR = p.theta_R;
  double r = tR[0] + tR[static_cast<std::size_t>(K + 1)] * out.E + tR[static_cast<std::size_t>(K + 2)] * Rp;
  for (int k = 1; k <= K; ++k) r += tR[static_cast<std::size_t>(k)] * rec_.M[static_cast<std::size_t>(k - 1)];
  if (p.has_AR())
    for (int k = 1; k <= K; ++k)
      r += tR[static_cast<std::size_t>(K + 2 + k)] * rec_.A[static_cast<std::size_t>(k - 1)];
  out.R = p.bounds(Var::R).clamp(r + noise_.R);

  out.O = p.bounds(Var::O).clamp(p.theta_O[0] + p.theta_O[1] * Rp + noise_.O);
  return out;
}

BagRecord step_bag(const EnvParams& p, double prev_E, double prev_R,
                   const std::vector<int>& actions, const BagNoise& noise) {
  if (static_cast<int>(actions.size()) != p.K) throw ShapeError("action vector must have K entries");
  BagStepper st(p, prev_E, prev_R, noise);
  for (int a : actions) st.act(a);
  return st.finish();
}

BagRecord step_bag(const EnvParams& p, double prev_E, double prev_R,
                   const std::vector<int>& actions, Rng& rng) {
  if (static_cast<int>(actions.size()) != p.K) throw ShapeError("action vector must have K entries");
  return step_bag(p, prev_E, prev_R, actions, draw_bag_noise(p, rng));
}

// Variants ------------------------------------------------------------------

namespace {

const std::array<std::pair<VariantKind, const char*>, 8> kVariantNames = {{
    {VariantKind::vanilla, "vanilla"},
    {VariantKind::enhance_MR, "enhance_MR"},
    {VariantKind::enhance_AER, "enhance_AER"},
    {VariantKind::enhance_both, "enhance_both"},
    {VariantKind::add_RE, "add_RE"},
    {VariantKind::add_AR, "add_AR"},
    {VariantKind::add_RC, "add_RC"},
    {VariantKind::interaction_MA, "interaction_MA"},
}};

void require_coefficients(const VariantSpec& spec, std::size_t n) {
  if (spec.coefficients.size() != n)
    throw ConfigError("variant " + to_string(spec.kind) + " needs " + std::to_string(n) +
                      " coefficients, got " + std::to_string(spec.coefficients.size()));
}

EnvParams apply_variant(const EnvParams& base, const VariantSpec& spec, double s) {
  EnvParams p = base;
  const int K = p.K;
  const double xi = s * spec.xi;
  switch (spec.kind) {
    case VariantKind::vanilla:
      break;
    case VariantKind::enhance_MR:
      for (int k = 1; k <= K; ++k) p.theta_R[k] += xi;
      break;
    case VariantKind::enhance_both:
      for (int k = 1; k <= K; ++k) p.theta_R[k] += spec.mr_shift;
      [[fallthrough]];
    case VariantKind::enhance_AER:
      for (int k = 2; k <= K + 1; ++k) p.theta_E[k] -= xi;
      p.theta_R[K + 1] += 5.0 * xi;
      break;
    case VariantKind::add_RE:
      if (p.has_RE()) throw ConfigError("add_RE: R->E coefficient already present");
      require_coefficients(spec, 1);
      p.theta_E.push_back(s * spec.coefficients[0]);
      break;
    case VariantKind::add_AR:
      if (p.has_AR()) throw ConfigError("add_AR: A->R coefficients already present");
      require_coefficients(spec, static_cast<std::size_t>(K));
      if (!(spec.scale_divisor > 0.0)) throw ConfigError("add_AR: scale_divisor must be positive");
      for (double c : spec.coefficients) p.theta_R.push_back(s * c / spec.scale_divisor);
      break;
    case VariantKind::add_RC:
      if (p.has_RC()) throw ConfigError("add_RC: (E,R)->C coefficients already present");
      require_coefficients(spec, 2);
      p.theta_C = {p.theta_C[0], s * spec.coefficients[0], s * spec.coefficients[1]};
      break;
    case VariantKind::interaction_MA: {
      if (p.per_step_M()) throw ConfigError("interaction_MA needs a shared theta_M");
      require_coefficients(spec, static_cast<std::size_t>(K * (K - 1) / 2));
      std::vector<std::vector<double>> per(static_cast<std::size_t>(K), p.theta_M[0]);
      std::size_t idx = 0;
      for (int k = 2; k <= K; ++k)
        for (int j = 1; j < k; ++j) per[k - 1].push_back(s * spec.coefficients[idx++]);
      p.theta_M = per;
      p.clip_advantage_M = false;
      break;
    }
  }
  return p;
}

}  // namespace

std::string to_string(VariantKind k) {
  for (const auto& [kind, name] : kVariantNames)
    if (kind == k) return name;
  return "unknown";
}

VariantKind variant_kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kVariantNames)
    if (s == name) return kind;
  throw ConfigError("unknown variant kind: " + s);
}

nlohmann::json to_json(const VariantSpec& v) {
  nlohmann::json j{{"kind", to_string(v.kind)}, {"xi", v.xi}};
  if (v.kind == VariantKind::add_AR) j["scale_divisor"] = v.scale_divisor;
  if (v.kind == VariantKind::enhance_both) j["mr_shift"] = v.mr_shift;
  if (!v.coefficients.empty()) j["coefficients"] = v.coefficients;
  return j;
}

VariantSpec variant_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("variant must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "kind" && k != "xi" && k != "scale_divisor" && k != "coefficients" && k != "mr_shift")
      throw ConfigError("unknown variant key: " + k);
  }
  VariantSpec v;
  try {
    v.kind = variant_kind_from_string(j.at("kind").get<std::string>());
    v.xi = j.value("xi", 0.0);
    v.scale_divisor = j.value("scale_divisor", 1.0);
    v.mr_shift = j.value("mr_shift", 0.03);
    if (j.contains("coefficients")) v.coefficients = j["coefficients"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed variant: ") + e.what());
  }
  return v;
}

VariantResult make_variant_detailed(const EnvParams& p, const VariantSpec& spec) {
  p.validate();
  if (spec.kind == VariantKind::vanilla) return {p, 1.0, 0};
  if (!stationary_under_both(p)) throw ConfigError("base parameters are not stationary");
  double s = 1.0;
  for (int h = 0; h <= 20; ++h) {
    EnvParams out = apply_variant(p, spec, s);
    out.validate();
    if (stationary_under_both(out)) return {out, s, h};
    s *= 0.5;
  }
  throw ConfigError("variant stays non-stationary after 20 halvings");
}

EnvParams make_variant(const EnvParams& p, const VariantSpec& spec) {
  return make_variant_detailed(p, spec).params;
}

// Stationarity ----------------------------------------------------------------

namespace {

// Affine function of (1, R_{d-1}, E_{d-1}).
using Affine = Eigen::Vector3d;

}  // namespace

VarForm var_form(const EnvParams& p, const std::vector<int>& actions, double mean_C) {
  p.validate();
  const int K = p.K;
  if (static_cast<int>(actions.size()) != K) throw ShapeError("action pattern must have K entries");
  const Affine one(1, 0, 0), R(0, 1, 0), E(0, 0, 1);
  Affine C = mean_C * one;
  if (p.has_RC()) C += p.theta_C[1] * E + p.theta_C[2] * R;
  std::vector<Affine> M;
  for (int k = 1; k <= K; ++k) {
    const auto& th = p.theta_M_at(k);
    const double a = actions[k - 1];
    Affine adv = th[4] * one + th[5] * E + th[6] * R + th[7] * C;
    for (int j = 1; j < k && j + 7 < static_cast<int>(th.size()); ++j) adv += th[7 + j] * M[j - 1];
    M.push_back(th[0] * one + th[1] * E + th[2] * R + th[3] * C + a * adv);
  }
  const auto& tE = p.theta_E;
  Affine Ed = tE[0] * one + tE[1] * E;
  for (int k = 1; k <= K; ++k) {
    const double a = actions[k - 1];
    Ed += a * tE[k + 1] * one + a * tE[K + 1 + k] * E;
  }
  if (p.has_RE()) Ed += tE[2 * K + 2] * R;
  const auto& tR = p.theta_R;
  Affine Rd = tR[0] * one + tR[K + 1] * Ed + tR[K + 2] * R;
  for (int k = 1; k <= K; ++k) Rd += tR[k] * M[k - 1];
  if (p.has_AR())
    for (int k = 1; k <= K; ++k) Rd += tR[K + 2 + k] * actions[k - 1] * one;
  VarForm f;
  f.Phi << Rd(1), Rd(2), Ed(1), Ed(2);
  f.phi << Rd(0), Ed(0);
  return f;
}

StationarityReport check_stationarity(const Eigen::Matrix2d& Phi) {
  StationarityReport r;
  r.Phi = Phi;
  if (Phi(1, 0) == 0.0 || Phi(0, 1) == 0.0) {
    r.eigenvalues = {std::abs(Phi(0, 0)), std::abs(Phi(1, 1))};
  } else {
    const double tr = Phi.trace(), det = Phi.determinant();
    const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr / 4.0 - det));
    r.eigenvalues = {std::abs(tr / 2.0 + disc), std::abs(tr / 2.0 - disc)};
  }
  r.stationary = r.eigenvalues[0] < 1.0 && r.eigenvalues[1] < 1.0;
  return r;
}

StationarityReport check_stationarity(const EnvParams& p, int action_pattern) {
  if (action_pattern != 0 && action_pattern != 1)
    throw ConfigError("action pattern must be all-zeros (0) or all-ones (1)");
  std::vector<int> acts(static_cast<std::size_t>(p.K), action_pattern);
  return check_stationarity(var_form(p, acts, p.theta_C[0]).Phi);
}

bool stationary_under_both(const EnvParams& p) {
  return check_stationarity(p, 0).stationary && check_stationarity(p, 1).stationary;
}

std::array<double, 2> limiting_mean(const EnvParams& p, const std::vector<int>& actions,
                                    double mean_C) {
  VarForm f = var_form(p, actions, mean_C);
  Eigen::Matrix2d A = Eigen::Matrix2d::Identity() - f.Phi;
  if (std::abs(A.determinant()) < 1e-14) throw SingularError("I - Phi is singular");
  Eigen::Vector2d alpha = A.partialPivLu().solve(f.phi);
  return {alpha(0), alpha(1)};
}

// Episodes and STE ------------------------------------------------------------

std::array<double, 2> draw_initial_state(const EnvParams& p, Rng& rng) {
  const auto& d = p.initial_dist;
  double e = p.bounds(Var::E).clamp(d.mean_E + d.sd_E * std_normal(rng));
  double r = p.bounds(Var::R).clamp(d.mean_R + d.sd_R * std_normal(rng));
  return {e, r};
}

BagTrajectory simulate_episode(const EnvParams& p, int horizon, std::uint64_t seed,
                               const StepPolicy& policy) {
  Rng rng(seed);
  BagTrajectory traj;
  auto [E0, R0] = draw_initial_state(p, rng);
  traj.E0 = E0;
  traj.R0 = R0;
  double E = E0, R = R0;
  traj.bags.reserve(static_cast<std::size_t>(horizon));
  for (int d = 0; d < horizon; ++d) {
    BagStepper st(p, E, R, draw_bag_noise(p, rng));
    BagRecord partial;
    partial.prev_E = E;
    partial.prev_R = R;
    partial.C.reserve(static_cast<std::size_t>(p.K));
    while (!st.done()) {
      partial.C.push_back(st.context());
      StepView v = step_view(partial, p.K, st.step());
      int a = policy(v);
      partial.A.push_back(a);
      partial.M.push_back(st.act(a));
    }
    traj.bags.push_back(st.finish());
    E = traj.bags.back().E;
    R = traj.bags.back().R;
  }
  return traj;
}

double total_reward(const BagTrajectory& traj) {
  double t = 0.0;
  for (const auto& b : traj.bags) t += b.R;
  return t;
}

SteReport estimate_ste_detailed(const EnvParams& p, const StepPolicy& policy_star,
                                int n_episodes, int horizon, std::uint64_t seed) {
  if (n_episodes < 2) throw DegenerateError("STE needs at least 2 episodes");
  StepPolicy zero = [](const StepView&) { return 0; };
  const std::uint64_t tag = fnv1a("ste");
  double sum_star = 0.0, sum_zero = 0.0, sum_zero2 = 0.0;
  std::vector<double> zeros(static_cast<std::size_t>(n_episodes));
  for (int i = 0; i < n_episodes; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i), 0, 0, tag);
    sum_star += total_reward(simulate_episode(p, horizon, s, policy_star));
    zeros[i] = total_reward(simulate_episode(p, horizon, s, zero));
    sum_zero += zeros[i];
  }
  SteReport r;
  r.mean_star = sum_star / n_episodes;
  r.mean_zero = sum_zero / n_episodes;
  for (double z : zeros) sum_zero2 += (z - r.mean_zero) * (z - r.mean_zero);
  r.sd_zero = std::sqrt(sum_zero2 / (n_episodes - 1));
  if (!(r.sd_zero > 0.0)) throw DegenerateError("zero-policy return has zero variance");
  r.ste = (r.mean_star - r.mean_zero) / r.sd_zero;
  return r;
}

double estimate_ste(const EnvParams& p, const StepPolicy& policy_star, int n_episodes,
                    int horizon, std::uint64_t seed) {
  return estimate_ste_detailed(p, policy_star, n_episodes, horizon, seed).ste;
}

}  // namespace bagged_rl
