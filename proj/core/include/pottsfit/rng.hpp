#pragma once

#include <cstdint>
#include <random>

namespace pottsfit {

// splitmix64; used to derive independent child seeds from a master seed so
// parallel tasks (sites, chains, replicates) get decorrelated streams.
inline uint64_t split_seed(uint64_t master, uint64_t stream) {
  uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  // 53-bit mantissa draw in [0,1); avoids distribution-object state.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Beta(2,2) via two Gamma(2,1) draws; Gamma(2,1) = -log(U1*U2).
inline double beta22(Rng& rng) {
  double u1 = std::max(uniform01(rng), 1e-300);
  double u2 = std::max(uniform01(rng), 1e-300);
  double u3 = std::max(uniform01(rng), 1e-300);
  double u4 = std::max(uniform01(rng), 1e-300);
  double x = -std::log(u1 * u2);
  double y = -std::log(u3 * u4);
  return x / (x + y);
}

// Unif([-hi,-lo] U [lo,hi]), the sign chosen by a fair coin.
inline double uniform_signed_band(Rng& rng, double lo, double hi) {
  double mag = uniform(rng, lo, hi);
  return (rng() & 1u) ? mag : -mag;
}

}  // namespace pottsfit
