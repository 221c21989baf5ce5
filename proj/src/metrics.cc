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

#include "protoscope/metrics.h"

#include <string>

#include "protoscope/error.h"

namespace protoscope {

ConfusionMatrix CountConfusion(std::span<const int> predicted,
                               std::span<const int> actual, int positive) {
  if (predicted.size() != actual.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction/label count");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool pred_pos = predicted[i] == positive;
    const bool act_pos = actual[i] == positive;
    if (pred_pos && act_pos) {
      ++cm.tp;
    } else if (pred_pos) {
      ++cm.fp;
    } else if (act_pos) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

BinaryMetrics ComputeMetrics(const ConfusionMatrix& cm) {
  BinaryMetrics m;
  auto ratio = [&m](double num, double den) {
    if (den == 0.0) {
      m.degenerate = true;
      return 0.0;
    }
    return num / den;
  };
  m.accuracy = ratio(static_cast<double>(cm.tp + cm.tn),
                     static_cast<double>(cm.total()));
  m.precision =
      ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fp));
  m.recall =
      ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fn));
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

ClassificationReport Evaluate(std::span<const int> predicted,
                              std::span<const int> actual, int num_classes,
                              int positive_class) {
  if (predicted.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty evaluation set");
  }
  if (num_classes < 2 || positive_class < 0 || positive_class >= num_classes) {
    throw Error(ErrorCode::kInvalidArgument, "class configuration");
  }
  if (predicted.size() != actual.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "predicted/actual length");
  }
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] < 0 || predicted[i] >= num_classes || actual[i] < 0 ||
        actual[i] >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label out of range at " + std::to_string(i));
    }
  }
  ClassificationReport report;
  report.num_classes = num_classes;
  report.positive_class = positive_class;
  report.samples = static_cast<std::int64_t>(predicted.size());
  report.confusion = CountConfusion(predicted, actual, positive_class);
  report.accuracy = ComputeMetrics(report.confusion).accuracy;
  for (int k = 0; k < num_classes; ++k) {
    report.per_class.push_back(
        ComputeMetrics(CountConfusion(predicted, actual, k)));
  }
  report.macro.accuracy = report.accuracy;
  for (const BinaryMetrics& m : report.per_class) {
    report.macro.precision += m.precision / num_classes;
    report.macro.recall += m.recall / num_classes;
    report.macro.f1 += m.f1 / num_classes;
    report.macro.degenerate = report.macro.degenerate || m.degenerate;
  }
  return report;
}

}  // namespace protoscope
