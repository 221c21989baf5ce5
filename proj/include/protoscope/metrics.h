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

#ifndef PROTOSCOPE_METRICS_H_
#define PROTOSCOPE_METRICS_H_

#include <cstdint>
#include <span>
#include <vector>

namespace protoscope {

struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }

  friend bool operator==(const ConfusionMatrix&,
                         const ConfusionMatrix&) = default;
};

// One-vs-rest counts for `positive`. Throws kDimensionMismatch when the
// vectors differ in length.
ConfusionMatrix CountConfusion(std::span<const int> predicted,
                               std::span<const int> actual, int positive);

struct BinaryMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when a ratio had a zero denominator and was reported as 0.
  bool degenerate = false;
};

// (TP+TN)/N, TP/(TP+FP), TP/(TP+FN), 2PR/(P+R).
BinaryMetrics ComputeMetrics(const ConfusionMatrix& cm);

struct ClassificationReport {
  int num_classes = 0;
  int positive_class = 0;
  ConfusionMatrix confusion;  // for positive_class
  double accuracy = 0.0;
  std::vector<BinaryMetrics> per_class;
  BinaryMetrics macro;  // unweighted mean of per_class precision/recall/F1
  std::int64_t samples = 0;
};

// Throws kInvalidArgument for empty input or labels outside [0, num_classes).
ClassificationReport Evaluate(std::span<const int> predicted,
                              std::span<const int> actual, int num_classes,
                              int positive_class = 0);

}  // namespace protoscope

#endif  // PROTOSCOPE_METRICS_H_
