#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bagged_rl {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Stable 64-bit FNV-1a hash, used to turn agent names and purpose tags into
// seed components.
std::uint64_t fnv1a(std::string_view s);

// Chains splitmix64 over the components. The order is fixed: master seed,
// env index, replication, agent id, purpose.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t env, std::uint64_t replication,
                          std::uint64_t agent, std::uint64_t purpose);

inline double std_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

inline int bernoulli(Rng& rng, double p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < p ? 1 : 0;
}

}  // namespace bagged_rl
