/*
 * Copyright 2026 The Protoscope Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PROTOSCOPE_RNG_H_
#define PROTOSCOPE_RNG_H_

#include <cstdint>

namespace protoscope {

// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// SplitMix64 generator. The whole state is one 64-bit word, so a stream can be
// copied to replay a draw sequence exactly.
class RngStream {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit constexpr RngStream(std::uint64_t state) : state_(state) {}

  // Per-sample stream: state = Mix64(Mix64(Mix64(seed) ^ (epoch + γ)) ^
  // (index + 2γ)). Distinct (seed, epoch, index) triples give unrelated
  // streams.
  static constexpr RngStream Derive(std::uint64_t seed, std::uint64_t epoch,
                                    std::uint64_t index) {
    std::uint64_t s = Mix64(seed);
    s = Mix64(s ^ (epoch + kGamma));
    s = Mix64(s ^ (index + 2 * kGamma));
    return RngStream(s);
  }

  constexpr std::uint64_t NextU64() {
    state_ += kGamma;
    return Mix64(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  constexpr double NextUnit() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi); returns lo when lo == hi.
  constexpr double Uniform(double lo, double hi) {
    return lo + (hi - lo) * NextUnit();
  }

  // Uniform integer in [0, bound), bound > 0. Lemire's multiply-shift with
  // rejection, so there is no modulo bias.
  std::uint64_t NextBelow(std::uint64_t bound);

  // Standard normal via Box-Muller; consumes two draws per call.
  double NextNormal();

  constexpr std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace protoscope

#endif  // PROTOSCOPE_RNG_H_
