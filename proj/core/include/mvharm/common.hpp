#pragma once

#include <cstdint>
#include <functional>

namespace mvharm {

// Deterministic RNG used everywhere randomness is needed. splitmix64 core,
// so streams are identical across platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi);  // inclusive bounds

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal();

 private:
  uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// Derives an independent child seed from (seed, stream index).
uint64_t mix_seed(uint64_t seed, uint64_t stream);

// Static partitioning over [0, n). Each index is processed by exactly one
// worker and every output element is computed serially within its chunk, so
// results are bit-identical for any thread count. `grain` is the minimum
// work per chunk; loops smaller than 2*grain run inline.
void parallel_for(int64_t n, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& fn);

// Worker count for parallel_for. 0 restores the default
// (hardware_concurrency). Values are clamped to [1, 64].
void set_thread_count(int n);
int thread_count();

}  // namespace mvharm
