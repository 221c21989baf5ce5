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

#include "protoscope/train.h"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <string>

#include "protoscope/error.h"
#include "protoscope/rng.h"

namespace protoscope {
namespace {

constexpr std::uint64_t kShuffleSalt = 0x73687566666c6521ULL;
constexpr std::uint64_t kTreeInitSalt = 0x70726f746f747265ULL;

}  // namespace

FeatureMapSet::FeatureMapSet(std::vector<FeatureMap> maps,
                             std::vector<int> labels)
    : maps_(std::move(maps)), labels_(std::move(labels)) {
  if (maps_.size() != labels_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one label per feature map");
  }
}

ImageSampleSet::ImageSampleSet(Loader loader, std::vector<int> labels,
                               std::vector<std::uint64_t> keys,
                               std::shared_ptr<const FrozenBackbone> backbone,
                               AugmentPreset preset, AugmentParams params,
                               std::uint64_t seed)
    : loader_(std::move(loader)),
      labels_(std::move(labels)),
      keys_(std::move(keys)),
      backbone_(std::move(backbone)),
      preset_(preset),
      params_(params),
      seed_(seed),
      clean_cache_(labels_.size()) {
  if (keys_.size() != labels_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one key per sample");
  }
  if (!backbone_) throw Error(ErrorCode::kInvalidArgument, "null backbone");
  if (params_.target_size != backbone_->arch().input_size) {
    throw Error(ErrorCode::kDimensionMismatch,
                "augmentation target " + std::to_string(params_.target_size) +
                    " vs backbone input " +
                    std::to_string(backbone_->arch().input_size));
  }
}

FeatureMap ImageSampleSet::Features(std::size_t i, std::uint64_t epoch,
                                    bool augment) const {
  if (augment && !preset_.IsDeterministic()) {
    RngStream rng = RngStream::Derive(seed_, epoch, keys_.at(i));
    return backbone_->Extract(ApplyPreset(loader_(i), preset_, rng, params_));
  }
  std::optional<FeatureMap>& cached = clean_cache_.at(i);
  if (!cached) {
    cached = backbone_->Extract(
        BaseTransform(loader_(i), params_.target_size, params_.norm));
  }
  return *cached;
}

void TrainConfig::Validate() const {
  if (!(learning_rate >= 0.0) || batch_size < 1 || epochs < 1 || depth < 1 ||
      num_classes < 2 || positive_class < 0 || positive_class >= num_classes) {
    throw Error(ErrorCode::kInvalidArgument, "invalid training configuration");
  }
}

int ArgMax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) -
                          values.begin());
}

EvaluationResult EvaluateModel(const PrototypeTree& tree, const SampleSet& set,
                               int positive_class) {
  if (set.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty evaluation set");
  }
  EvaluationResult result;
  double loss = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Prediction pred = Predict(tree, set.Features(i, 0, false));
    result.predicted.push_back(ArgMax(pred.distribution));
    result.actual.push_back(set.label(i));
    loss += CrossEntropy(pred, set.label(i));
  }
  result.mean_loss = loss / static_cast<double>(set.size());
  result.report = Evaluate(result.predicted, result.actual, tree.num_classes(),
                           positive_class);
  return result;
}

TrainResult TrainModel(const SampleSet& train, const SampleSet* test,
                       const TrainConfig& config, PrototypeTree init,
                       const EpochCallback& on_epoch) {
  config.Validate();
  if (train.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty training set");
  }
  TrainResult result;
  result.tree = std::move(init);
  PrototypeTree& tree = result.tree;
  tree.clear_provenance();

  const std::size_t n = train.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t batches = (n + batch - 1) / batch;
  const auto total_steps = static_cast<std::int64_t>(batches) * config.epochs;
  const OneCycleConfig schedule{config.learning_rate, config.pct_start,
                                config.div_factor, config.final_div_factor};
  AdamState proto_state(tree.prototypes().size());
  AdamState logit_state(tree.logits().size());

  std::int64_t step = 0;
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng = RngStream::Derive(config.seed ^ kShuffleSalt,
                                      static_cast<std::uint64_t>(epoch), 0);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.NextBelow(i)]);
    }
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * batch;
      const std::size_t end = std::min(n, begin + batch);
      const double scale = 1.0 / static_cast<double>(end - begin);
      TreeGradient grad;
      grad.prototypes.assign(tree.prototypes().size(), 0.0);
      grad.logits.assign(tree.logits().size(), 0.0);
      for (std::size_t j = begin; j < end; ++j) {
        const std::size_t idx = order[j];
        const FeatureMap fm =
            train.Features(idx, static_cast<std::uint64_t>(epoch), true);
        grad.Accumulate(Backward(tree, fm, train.label(idx)), scale);
      }
      const double lr = OneCycleLr(step, total_steps, schedule);
      AdamStep(tree.prototypes(), grad.prototypes, proto_state, lr,
               config.adam);
      AdamStep(tree.logits(), grad.logits, logit_state, lr, config.adam);
      ++step;
    }
    tree.CheckFinite();

    EpochRecord record;
    record.epoch = epoch + 1;
    const EvaluationResult train_eval =
        EvaluateModel(tree, train, config.positive_class);
    record.train_loss = train_eval.mean_loss;
    record.train_accuracy = train_eval.report.accuracy;
    if (test != nullptr && test->size() > 0) {
      record.test_accuracy =
          EvaluateModel(tree, *test, config.positive_class).report.accuracy;
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

TrainResult TrainModel(const SampleSet& train, const SampleSet* test,
                       const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  config.Validate();
  if (train.size() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty training set");
  }
  const int dim = train.Features(0, 0, false).depth();
  PrototypeTree init =
      PrototypeTree::Random(config.depth, dim, config.num_classes,
                            Mix64(config.seed ^ kTreeInitSalt));
  return TrainModel(train, test, config, std::move(init), on_epoch);
}

void WriteHistoryCsv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,train_loss,train_acc,test_acc\n";
  const auto old_precision = out.precision(17);
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.train_accuracy << ',';
    if (r.test_accuracy) out << *r.test_accuracy;
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace protoscope
