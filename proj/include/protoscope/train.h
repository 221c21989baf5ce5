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

#ifndef PROTOSCOPE_TRAIN_H_
#define PROTOSCOPE_TRAIN_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "protoscope/augment.h"
#include "protoscope/features.h"
#include "protoscope/metrics.h"
#include "protoscope/optim.h"
#include "protoscope/prototree.h"

namespace protoscope {

// Labeled samples that can produce a feature map, optionally augmented.
class SampleSet {
 public:
  virtual ~SampleSet() = default;

  virtual std::size_t size() const = 0;
  virtual int label(std::size_t i) const = 0;
  // Stable per-sample key used to derive augmentation streams.
  virtual std::uint64_t key(std::size_t i) const { return i; }
  // augment == false must return the same map on every call.
  virtual FeatureMap Features(std::size_t i, std::uint64_t epoch,
                              bool augment) const = 0;
};

// Precomputed maps (external backbones, tests). Augmentation is a no-op.
class FeatureMapSet : public SampleSet {
 public:
  FeatureMapSet(std::vector<FeatureMap> maps, std::vector<int> labels);

  std::size_t size() const override { return maps_.size(); }
  int label(std::size_t i) const override { return labels_.at(i); }
  FeatureMap Features(std::size_t i, std::uint64_t, bool) const override {
    return maps_.at(i);
  }
  const std::vector<FeatureMap>& maps() const { return maps_; }

 private:
  std::vector<FeatureMap> maps_;
  std::vector<int> labels_;
};

// ROI images pushed through augmentation and a frozen backbone. Clean
// (un-augmented) features are cached after first use.
class ImageSampleSet : public SampleSet {
 public:
  using Loader = std::function<RasterImage(std::size_t)>;

  ImageSampleSet(Loader loader, std::vector<int> labels,
                 std::vector<std::uint64_t> keys,
                 std::shared_ptr<const FrozenBackbone> backbone,
                 AugmentPreset preset, AugmentParams params,
                 std::uint64_t seed);

  std::size_t size() const override { return labels_.size(); }
  int label(std::size_t i) const override { return labels_.at(i); }
  std::uint64_t key(std::size_t i) const override { return keys_.at(i); }
  FeatureMap Features(std::size_t i, std::uint64_t epoch,
                      bool augment) const override;

 private:
  Loader loader_;
  std::vector<int> labels_;
  std::vector<std::uint64_t> keys_;
  std::shared_ptr<const FrozenBackbone> backbone_;
  AugmentPreset preset_;
  AugmentParams params_;
  std::uint64_t seed_;
  mutable std::vector<std::optional<FeatureMap>> clean_cache_;
};

class SubsetView : public SampleSet {
 public:
  SubsetView(const SampleSet& base, std::vector<std::size_t> indices)
      : base_(base), indices_(std::move(indices)) {}

  std::size_t size() const override { return indices_.size(); }
  int label(std::size_t i) const override {
    return base_.label(indices_.at(i));
  }
  std::uint64_t key(std::size_t i) const override {
    return base_.key(indices_.at(i));
  }
  FeatureMap Features(std::size_t i, std::uint64_t epoch,
                      bool augment) const override {
    return base_.Features(indices_.at(i), epoch, augment);
  }

 private:
  const SampleSet& base_;
  std::vector<std::size_t> indices_;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 16;
  int epochs = 50;
  AdamConfig adam;
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
  std::uint64_t seed = 0;
  int depth = 3;
  int num_classes = 2;
  int positive_class = 0;

  // Throws kInvalidArgument for non-positive batch size / epochs, negative
  // learning rate, depth < 1 or fewer than two classes.
  void Validate() const;
};

struct EpochRecord {
  int epoch = 0;
  // Measured after the epoch's updates on un-augmented training features.
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> test_accuracy;
};

struct TrainResult {
  PrototypeTree tree;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch training: per epoch a seeded shuffle, mean-reduced batch
// gradients (the last partial batch included), Adam with the one-cycle
// schedule stepped per batch. Throws kInvalidArgument for an empty training
// set and kDimensionMismatch when feature depth differs from the tree.
TrainResult TrainModel(const SampleSet& train, const SampleSet* test,
                       const TrainConfig& config, PrototypeTree init,
                       const EpochCallback& on_epoch = {});

// Builds the initial tree from config.seed and the first sample's depth.
TrainResult TrainModel(const SampleSet& train, const SampleSet* test,
                       const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

struct EvaluationResult {
  ClassificationReport report;
  std::vector<int> predicted;
  std::vector<int> actual;
  double mean_loss = 0.0;
};

// Prediction is the argmax of the soft distribution (lowest class on ties).
// Throws kInvalidArgument for an empty set.
EvaluationResult EvaluateModel(const PrototypeTree& tree, const SampleSet& set,
                               int positive_class = 0);

int ArgMax(std::span<const double> values);

// "epoch,train_loss,train_acc,test_acc" with an empty test_acc when absent.
void WriteHistoryCsv(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace protoscope

#endif  // PROTOSCOPE_TRAIN_H_
