// Copyright 2026 The dtgspl Authors
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

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dtgspl {

// Seeded random source. All draws are derived from mt19937_64 output with
// hand-rolled transforms (Box-Muller etc.), so equal seeds give bit-identical
// streams on every platform; std::*_distribution is never used.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range.
  int uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(eng_() % span);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double exponential() { return -std::log(1.0 - uniform()); }

  // Flat Dirichlet over k coordinates: normalized unit exponentials.
  std::vector<double> dirichlet_flat(int k) {
    std::vector<double> w(k);
    double sum = 0.0;
    for (auto& x : w) {
      x = exponential();
      sum += x;
    }
    for (auto& x : w) x /= sum;
    return w;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Deterministic sub-stream seeds, so independent concerns (shuffling,
  // augmentation, parameter init) never share or reorder draws.
  static uint64_t derive(uint64_t seed, std::string_view tag) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (const char c : tag) {
      h ^= static_cast<uint8_t>(c);
      h *= 1099511628211ull;
    }
    return splitmix(seed ^ h);
  }

  static uint64_t derive(uint64_t seed, uint64_t index) {
    return splitmix(seed + 0x9e3779b97f4a7c15ull * (index + 1));
  }

 private:
  static uint64_t splitmix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dtgspl
