#ifndef MATK_UTIL_HPP_
#define MATK_UTIL_HPP_

#include <cstdint>
#include <functional>
#include <string_view>

namespace matk {

// splitmix64 step; used to derive independent per-item seeds from a base seed
// so that parallel work does not depend on iteration order.
inline uint64_t mix_seed(uint64_t base, uint64_t stream) {
  uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Global worker-thread cap for the parallel helpers (CLI --threads).
int max_threads();
void set_max_threads(int n);

// Runs fn(i) for i in [0, n). Work items must be independent; results must not
// depend on the partitioning, so outputs are identical for any thread count.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace matk

#endif  // MATK_UTIL_HPP_
