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

#include "protoscope/split.h"

#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "protoscope/error.h"
#include "protoscope/rng.h"

namespace protoscope {
namespace {

using GroupKey = std::pair<int, int>;  // (session, label)

std::map<GroupKey, std::vector<std::size_t>> GroupSamples(
    std::span<const SplitSample> samples) {
  std::map<GroupKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    groups[{samples[i].session, samples[i].label}].push_back(i);
  }
  return groups;
}

// Fisher-Yates with a stream derived from (seed, session, label).
void ShuffleGroup(std::vector<std::size_t>& members, std::uint64_t seed,
                  const GroupKey& key) {
  RngStream rng = RngStream::Derive(seed, static_cast<std::uint64_t>(key.first),
                                    static_cast<std::uint64_t>(key.second));
  for (std::size_t i = members.size(); i > 1; --i) {
    const std::size_t j = rng.NextBelow(i);
    std::swap(members[i - 1], members[j]);
  }
}

std::string GroupName(const GroupKey& key) {
  return "session " + std::to_string(key.first) + " label " +
         std::to_string(key.second);
}

}  // namespace

std::vector<std::size_t> SplitPlan::Indices(int group) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == group) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> SplitPlan::IndicesExcept(int group) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != group) out.push_back(i);
  }
  return out;
}

SplitPlan SplitTrainTest(std::span<const SplitSample> samples,
                         double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "test fraction outside [0, 1]");
  }
  SplitPlan plan;
  plan.kind = SplitPlan::Kind::kTrainTest;
  plan.assignment.assign(samples.size(), kTrainGroup);
  for (auto& [key, members] : GroupSamples(samples)) {
    if (members.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument,
                  GroupName(key) + " has fewer than 2 samples");
    }
    ShuffleGroup(members, seed, key);
    const auto n_test = static_cast<std::size_t>(
        std::lround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < n_test; ++i) {
      plan.assignment[members[i]] = kTestGroup;
    }
  }
  return plan;
}

SplitPlan KFoldSplit(std::span<const SplitSample> samples, int k,
                     std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be >= 2");
  SplitPlan plan;
  plan.kind = SplitPlan::Kind::kKFold;
  plan.folds = k;
  plan.assignment.assign(samples.size(), 0);
  for (auto& [key, members] : GroupSamples(samples)) {
    if (members.size() < static_cast<std::size_t>(k)) {
      plan.warnings.push_back(GroupName(key) + " has " +
                              std::to_string(members.size()) +
                              " samples, fewer than k = " + std::to_string(k));
    }
    ShuffleGroup(members, seed, key);
    for (std::size_t i = 0; i < members.size(); ++i) {
      plan.assignment[members[i]] = static_cast<int>(i % k);
    }
  }
  return plan;
}

}  // namespace protoscope
