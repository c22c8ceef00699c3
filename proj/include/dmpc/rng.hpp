// Copyright 2026 dmpc contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DMPC_RNG_HPP_
#define DMPC_RNG_HPP_

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace dmpc {

// Deterministic RNG with fully specified sampling routines. The standard
// distribution adaptors are implementation-defined, so uniform and normal
// draws are generated here from raw engine output to keep run artifacts
// reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(SplitMix64(seed)) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double Uniform01() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }

  // Standard normal via the polar (Marsaglia) method.
  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * Uniform01() - 1.0;
      v = 2.0 * Uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  Eigen::VectorXd NormalVector(int n) {
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out[i] = Normal();
    return out;
  }

  Eigen::MatrixXd NormalMatrix(int rows, int cols) {
    Eigen::MatrixXd out(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) out(r, c) = Normal();
    return out;
  }

  // Uniform integer in [0, n).
  int UniformInt(int n) { return static_cast<int>(NextU64() % static_cast<uint64_t>(n)); }

  // Independent child stream; deterministic in (seed, id).
  Rng Substream(uint64_t id) const {
    return Rng(SplitMix64(seed_ ^ SplitMix64(0x9E3779B97F4A7C15ULL + id)));
  }

  uint64_t seed() const { return seed_; }

  static uint64_t SplitMix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dmpc

#endif  // DMPC_RNG_HPP_
