// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace testutil {

// splitmix64; deterministic across platforms and standard libraries
struct Rng {
  uint64_t state;

  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  int64_t uniform(int64_t lo, int64_t hi) {  // inclusive bounds
    return lo + int64_t(next() % uint64_t(hi - lo + 1));
  }

  double unit() { return (double(next() >> 11) + 0.5) * 0x1.0p-53; }

  // raw scaled-integer sample inside [lo, hi]
  std::vector<int64_t> raw_vector(size_t n, int64_t lo, int64_t hi) {
    std::vector<int64_t> out(n);
    for (auto& v : out) v = uniform(lo, hi);
    return out;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(next() % i);
      std::swap(v[i - 1], v[j]);
    }
  }
};

}  // namespace testutil
