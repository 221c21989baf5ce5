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

#ifndef PROTOSCOPE_SPLIT_H_
#define PROTOSCOPE_SPLIT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace protoscope {

struct SplitSample {
  int label = 0;
  int session = 0;
};

struct SplitPlan {
  enum class Kind { kTrainTest, kKFold };
  Kind kind = Kind::kTrainTest;
  int folds = 0;
  // kTrainTest: 0 = train, 1 = test. kKFold: fold index.
  std::vector<int> assignment;
  std::vector<std::string> warnings;

  std::vector<std::size_t> Indices(int group) const;
  std::vector<std::size_t> IndicesExcept(int group) const;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

inline constexpr int kTrainGroup = 0;
inline constexpr int kTestGroup = 1;

// Per (session, label) group: seeded Fisher-Yates shuffle, then the first
// round(test_fraction * n) samples go to test. Throws kInvalidArgument for a
// group with fewer than two samples.
SplitPlan SplitTrainTest(std::span<const SplitSample> samples,
                         double test_fraction, std::uint64_t seed);

// Per (session, label) group: seeded shuffle, then round-robin fold
// assignment starting at fold 0. Groups smaller than k produce a warning.
// Throws kInvalidArgument for k < 2.
SplitPlan KFoldSplit(std::span<const SplitSample> samples, int k,
                     std::uint64_t seed);

}  // namespace protoscope

#endif  // PROTOSCOPE_SPLIT_H_
