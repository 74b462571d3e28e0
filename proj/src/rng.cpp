#include "bagged_rl/rng.hpp"

namespace bagged_rl {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t env, std::uint64_t replication,
                          std::uint64_t agent, std::uint64_t purpose) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ env);
  h = splitmix64(h ^ replication);
  h = splitmix64(h ^ agent);
  h = splitmix64(h ^ purpose);
  return h;
}

}  // namespace bagged_rl
