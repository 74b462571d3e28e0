#include "bagged_rl/features.hpp"

#include "bagged_rl/errors.hpp"

#include <algorithm>

namespace bagged_rl {

std::string to_string(StateKind k) {
  switch (k) {
    case StateKind::S_prime: return "S_prime";
    case StateKind::S_doubleprime: return "S_doubleprime";
    case StateKind::S_tripleprime: return "S_tripleprime";
  }
  return "unknown";
}

StateKind state_kind_from_string(const std::string& s) {
  if (s == "S_prime") return StateKind::S_prime;
  if (s == "S_doubleprime") return StateKind::S_doubleprime;
  if (s == "S_tripleprime") return StateKind::S_tripleprime;
  throw ConfigError("unknown state kind: " + s);
}

Eigen::VectorXd build_state(const StepView& v, StateKind kind) {
  const int past = v.k - 1;
  std::vector<double> s{v.E_prev, v.R_prev};
  switch (kind) {
    case StateKind::S_prime:
      s.insert(s.end(), v.M.begin(), v.M.end());
      for (int a : v.A) s.push_back(a);
      s.push_back(v.context());
      break;
    case StateKind::S_doubleprime:
      for (int a : v.A) s.push_back(a);
      break;
    case StateKind::S_tripleprime:
      s.insert(s.end(), v.C.begin(), v.C.begin() + past);
      for (int a : v.A) s.push_back(a);
      s.push_back(v.context());
      break;
  }
  return Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

Eigen::VectorXd build_state(const ObservedHistory& h, StateKind kind) {
  return build_state(h.current(), kind);
}

std::string to_string(BasisKind k) {
  switch (k) {
    case BasisKind::pooled: return "pooled";
    case BasisKind::brlsvi_Sp: return "S_prime";
    case BasisKind::brlsvi_Spp: return "S_doubleprime";
    case BasisKind::brlsvi_Sppp: return "S_tripleprime";
  }
  return "unknown";
}

BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "pooled") return BasisKind::pooled;
  return basis_for_state(state_kind_from_string(s));
}

BasisKind basis_for_state(StateKind k) {
  switch (k) {
    case StateKind::S_prime: return BasisKind::brlsvi_Sp;
    case StateKind::S_doubleprime: return BasisKind::brlsvi_Spp;
    case StateKind::S_tripleprime: return BasisKind::brlsvi_Sppp;
  }
  return BasisKind::pooled;
}

int main_block_dim(BasisKind kind, int K) {
  return kind == BasisKind::brlsvi_Spp ? 6 + (K - 1) : 6 + 2 * (K - 1) + 1;
}

int block_dim(BasisKind kind, int k) {
  switch (kind) {
    case BasisKind::pooled: return 4;
    case BasisKind::brlsvi_Sp:
    case BasisKind::brlsvi_Sppp: return 4 + 2 * (k - 1);
    case BasisKind::brlsvi_Spp: return 3 + (k - 1);
  }
  return 0;
}

int block_offset(BasisKind kind, int K, int k) {
  int off = main_block_dim(kind, K);
  for (int j = 1; j < k; ++j) off += block_dim(kind, j);
  return off;
}

int basis_dim(BasisKind kind, int K) { return block_offset(kind, K, K + 1); }

void fill_features(BasisKind kind, const StepView& v, int a, double* out) {
  const int K = v.K, k = v.k;
  const double E = v.E_prev, R = v.R_prev, C = v.context();
  std::fill(out, out + basis_dim(kind, K), 0.0);
  double* p = out;
  *p++ = 1.0;
  *p++ = k;
  *p++ = E;
  *p++ = k * E;
  *p++ = R;
  *p++ = k * R;
  // Step-masked history: entries j >= k stay zero.
  if (kind == BasisKind::pooled || kind == BasisKind::brlsvi_Sp) {
    for (int j = 0; j < k - 1; ++j) p[j] = v.M[j];
    p += K - 1;
  } else if (kind == BasisKind::brlsvi_Sppp) {
    for (int j = 0; j < k - 1; ++j) p[j] = v.C[j];
    p += K - 1;
  }
  for (int j = 0; j < k - 1; ++j) p[j] = v.A[j];
  p += K - 1;
  if (kind != BasisKind::brlsvi_Spp) *p++ = C;
  if (a == 0) return;
  double* b = out + block_offset(kind, K, k);
  *b++ = a;
  *b++ = a * E;
  *b++ = a * R;
  switch (kind) {
    case BasisKind::pooled:
      *b++ = a * C;
      break;
    case BasisKind::brlsvi_Sp:
      *b++ = a * C;
      for (int j = 0; j < k - 1; ++j) *b++ = a * v.M[j];
      for (int j = 0; j < k - 1; ++j) *b++ = a * v.A[j];
      break;
    case BasisKind::brlsvi_Spp:
      for (int j = 0; j < k - 1; ++j) *b++ = a * v.A[j];
      break;
    case BasisKind::brlsvi_Sppp:
      *b++ = a * C;
      for (int j = 0; j < k - 1; ++j) *b++ = a * v.C[j];
      for (int j = 0; j < k - 1; ++j) *b++ = a * v.A[j];
      break;
  }
}

Eigen::VectorXd features(BasisKind kind, const StepView& v, int a) {
  Eigen::VectorXd x(basis_dim(kind, v.K));
  fill_features(kind, v, a, x.data());
  return x;
}

Eigen::VectorXd features_pooled(const StepView& v, int a) {
  if (v.K != 5) throw UnsupportedError("the pooled basis is defined for K = 5 only");
  return features(BasisKind::pooled, v, a);
}

Eigen::VectorXd features_pooled(const ObservedHistory& h, int a) {
  return features_pooled(h.current(), a);
}

int rlsvi_dim(int k) { return 2 * (k - 1) + 8; }

Eigen::VectorXd features_rlsvi(const StepView& v, int a) {
  const int k = v.k;
  Eigen::VectorXd x(rlsvi_dim(k));
  const double E = v.E_prev, R = v.R_prev, C = v.context();
  int i = 0;
  x(i++) = 1.0;
  x(i++) = E;
  x(i++) = R;
  for (int j = 0; j < k - 1; ++j) x(i++) = v.M[j];
  for (int j = 0; j < k - 1; ++j) x(i++) = v.A[j];
  x(i++) = C;
  x(i++) = a;
  x(i++) = a * E;
  x(i++) = a * R;
  x(i++) = a * C;
  return x;
}

Eigen::VectorXd features_ts(const StepView& v, int a) {
  Eigen::VectorXd x(kTsDim);
  const double E = v.E_prev, R = v.R_prev, C = v.context();
  x << 1.0, E, R, C, a, a * E, a * R, a * C;
  return x;
}

int srlsvi_dim(int K) { return 3 + 3 * (1 << K); }

Eigen::VectorXd features_srlsvi(double E_prev, double R_prev, int bag_action, int K) {
  if (bag_action < 0 || bag_action >= (1 << K)) throw std::out_of_range("bag action index");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(srlsvi_dim(K));
  x.head<3>() << 1.0, E_prev, R_prev;
  x.segment<3>(3 + 3 * bag_action) << 1.0, E_prev, R_prev;
  return x;
}

int bag_action_index(std::span<const int> actions) {
  int idx = 0;
  for (int a : actions) idx = (idx << 1) | (a ? 1 : 0);
  return idx;
}

std::vector<int> bag_action_bits(int index, int K) {
  std::vector<int> bits(static_cast<std::size_t>(K));
  for (int k = K - 1; k >= 0; --k) {
    bits[k] = index & 1;
    index >>= 1;
  }
  return bits;
}

Eigen::VectorXd features_agent(AgentFeatureKind kind, const StepView& v, int action) {
  switch (kind) {
    case AgentFeatureKind::srlsvi: return features_srlsvi(v.E_prev, v.R_prev, action, v.K);
    case AgentFeatureKind::rlsvi_k: return features_rlsvi(v, action);
    case AgentFeatureKind::ts: return features_ts(v, action);
    case AgentFeatureKind::brlsvi_Sp: return features(BasisKind::brlsvi_Sp, v, action);
    case AgentFeatureKind::brlsvi_Spp: return features(BasisKind::brlsvi_Spp, v, action);
    case AgentFeatureKind::brlsvi_Sppp: return features(BasisKind::brlsvi_Sppp, v, action);
  }
  throw ConfigError("unknown feature kind");
}

int features_agent_dim(AgentFeatureKind kind, int K, int k) {
  switch (kind) {
    case AgentFeatureKind::srlsvi: return srlsvi_dim(K);
    case AgentFeatureKind::rlsvi_k: return rlsvi_dim(k);
    case AgentFeatureKind::ts: return kTsDim;
    case AgentFeatureKind::brlsvi_Sp: return basis_dim(BasisKind::brlsvi_Sp, K);
    case AgentFeatureKind::brlsvi_Spp: return basis_dim(BasisKind::brlsvi_Spp, K);
    case AgentFeatureKind::brlsvi_Sppp: return basis_dim(BasisKind::brlsvi_Sppp, K);
  }
  return 0;
}

}  // namespace bagged_rl
