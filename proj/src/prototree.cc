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

#include "protoscope/prototree.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "protoscope/error.h"
#include "protoscope/rng.h"

namespace protoscope {
namespace {

void CheckDepth(const PrototypeTree& tree, const FeatureMap& fm) {
  if (fm.depth() != tree.feature_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature depth " + std::to_string(fm.depth()) +
                    ", tree expects " + std::to_string(tree.feature_dim()));
  }
}

std::vector<double> Softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

// Probability of reaching every heap node (index 1 .. 2^(depth+1) - 1).
std::vector<double> ReachProbabilities(int depth,
                                       std::span<const double> similarities) {
  const int internal = (1 << depth) - 1;
  std::vector<double> reach(static_cast<std::size_t>(2) << depth, 0.0);
  reach[1] = 1.0;
  for (int n = 1; n <= internal; ++n) {
    const double s = similarities[n - 1];
    reach[2 * n] = reach[n] * (1.0 - s);
    reach[2 * n + 1] = reach[n] * s;
  }
  return reach;
}

}  // namespace

PrototypeTree::PrototypeTree(int depth, int feature_dim, int num_classes)
    : depth_(depth), feature_dim_(feature_dim), num_classes_(num_classes) {
  if (depth < 1 || depth > 16 || feature_dim < 1 || num_classes < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "tree needs depth in [1, 16], feature_dim >= 1, classes >= 2");
  }
  prototypes_.assign(static_cast<std::size_t>(num_internal()) * feature_dim,
                     0.0);
  logits_.assign(static_cast<std::size_t>(num_leaves()) * num_classes, 0.0);
}

PrototypeTree PrototypeTree::Random(int depth, int feature_dim, int num_classes,
                                    std::uint64_t seed) {
  PrototypeTree tree(depth, feature_dim, num_classes);
  RngStream rng(seed);
  for (double& v : tree.prototypes_) v = 0.1 * rng.NextNormal();
  for (double& v : tree.logits_) v = 0.1 * rng.NextNormal();
  return tree;
}

std::span<const double> PrototypeTree::prototype(int node) const {
  if (!IsInternal(node, depth_)) {
    throw Error(ErrorCode::kInvalidArgument,
                "node " + std::to_string(node) + " is not internal");
  }
  return {
      prototypes_.data() + static_cast<std::size_t>(node - 1) * feature_dim_,
      static_cast<std::size_t>(feature_dim_)};
}

std::span<double> PrototypeTree::prototype(int node) {
  if (!IsInternal(node, depth_)) {
    throw Error(ErrorCode::kInvalidArgument,
                "node " + std::to_string(node) + " is not internal");
  }
  return {
      prototypes_.data() + static_cast<std::size_t>(node - 1) * feature_dim_,
      static_cast<std::size_t>(feature_dim_)};
}

std::span<const double> PrototypeTree::leaf_logits(int leaf) const {
  if (leaf < 0 || leaf >= num_leaves()) {
    throw Error(ErrorCode::kInvalidArgument, "leaf out of range");
  }
  return {logits_.data() + static_cast<std::size_t>(leaf) * num_classes_,
          static_cast<std::size_t>(num_classes_)};
}

std::span<double> PrototypeTree::leaf_logits(int leaf) {
  if (leaf < 0 || leaf >= num_leaves()) {
    throw Error(ErrorCode::kInvalidArgument, "leaf out of range");
  }
  return {logits_.data() + static_cast<std::size_t>(leaf) * num_classes_,
          static_cast<std::size_t>(num_classes_)};
}

std::vector<double> PrototypeTree::LeafDistribution(int leaf) const {
  return Softmax(leaf_logits(leaf));
}

void PrototypeTree::set_provenance(int node, std::optional<Provenance> p) {
  if (!IsInternal(node, depth_)) {
    throw Error(ErrorCode::kInvalidArgument, "provenance on non-internal node");
  }
  if (provenance_.empty()) provenance_.resize(num_internal());
  provenance_[node - 1] = std::move(p);
}

void PrototypeTree::clear_provenance() { provenance_.clear(); }

void PrototypeTree::CheckFinite() const {
  for (double v : prototypes_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "prototype");
  }
  for (double v : logits_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "leaf logit");
  }
}

NearestPatch FindNearestPatch(const FeatureMap& fm,
                              std::span<const double> prototype) {
  if (prototype.size() != static_cast<std::size_t>(fm.depth())) {
    throw Error(ErrorCode::kDimensionMismatch,
                "prototype length " + std::to_string(prototype.size()) +
                    " vs feature depth " + std::to_string(fm.depth()));
  }
  NearestPatch best;
  best.squared_distance = std::numeric_limits<double>::infinity();
  for (int r = 0; r < fm.height(); ++r) {
    for (int c = 0; c < fm.width(); ++c) {
      const std::span<const float> z = fm.patch(r, c);
      double s = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = static_cast<double>(z[i]) - prototype[i];
        s += d * d;
      }
      if (s < best.squared_distance) {
        best.squared_distance = s;
        best.location = {r, c};
      }
    }
  }
  best.distance = std::sqrt(best.squared_distance);
  return best;
}

double Similarity(double distance) { return std::exp(-distance); }

std::vector<double> LeafProbabilities(int depth,
                                      std::span<const double> similarities) {
  if (depth < 1 ||
      similarities.size() != static_cast<std::size_t>((1 << depth) - 1)) {
    throw Error(ErrorCode::kDimensionMismatch, "one similarity per node");
  }
  const std::vector<double> reach = ReachProbabilities(depth, similarities);
  return {reach.begin() + (1 << depth), reach.end()};
}

RoutingTrace ComputeRouting(const PrototypeTree& tree, const FeatureMap& fm) {
  CheckDepth(tree, fm);
  RoutingTrace trace;
  trace.nodes.resize(tree.num_internal());
  std::vector<double> sims(tree.num_internal());
  for (int n = 1; n <= tree.num_internal(); ++n) {
    const NearestPatch np = FindNearestPatch(fm, tree.prototype(n));
    NodeRouting& node = trace.nodes[n - 1];
    node.location = np.location;
    node.distance = np.distance;
    node.squared_distance = np.squared_distance;
    node.similarity = Similarity(np.distance);
    sims[n - 1] = node.similarity;
  }
  trace.leaf_probability = LeafProbabilities(tree.depth(), sims);
  int n = 1;
  while (n < tree.num_leaves()) n = 2 * n + (sims[n - 1] >= 0.5 ? 1 : 0);
  trace.hard_leaf = n - tree.num_leaves();
  return trace;
}

Prediction Predict(const PrototypeTree& tree, const FeatureMap& fm) {
  Prediction pred;
  pred.trace = ComputeRouting(tree, fm);
  pred.distribution.assign(tree.num_classes(), 0.0);
  for (int leaf = 0; leaf < tree.num_leaves(); ++leaf) {
    const std::vector<double> q = tree.LeafDistribution(leaf);
    const double pi = pred.trace.leaf_probability[leaf];
    for (int k = 0; k < tree.num_classes(); ++k) {
      pred.distribution[k] += pi * q[k];
    }
  }
  return pred;
}

double CrossEntropy(std::span<const double> distribution, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= distribution.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "label " + std::to_string(label) + " out of range");
  }
  return -std::log(std::max(distribution[label], kProbabilityFloor));
}

double CrossEntropy(const Prediction& pred, int label) {
  return CrossEntropy(pred.distribution, label);
}

void TreeGradient::Accumulate(const TreeGradient& other, double scale) {
  if (prototypes.empty()) prototypes.assign(other.prototypes.size(), 0.0);
  if (logits.empty()) logits.assign(other.logits.size(), 0.0);
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    prototypes[i] += scale * other.prototypes[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] += scale * other.logits[i];
  }
}

TreeGradient Backward(const PrototypeTree& tree, const FeatureMap& fm,
                      int label, double* loss) {
  CheckDepth(tree, fm);
  if (label < 0 || label >= tree.num_classes()) {
    throw Error(ErrorCode::kInvalidArgument,
                "label " + std::to_string(label) + " out of range");
  }
  const int leaves = tree.num_leaves();
  const int internal = tree.num_internal();
  const int classes = tree.num_classes();
  const RoutingTrace trace = ComputeRouting(tree, fm);
  std::vector<double> sims(internal);
  for (int n = 0; n < internal; ++n) sims[n] = trace.nodes[n].similarity;
  const std::vector<double> reach = ReachProbabilities(tree.depth(), sims);

  std::vector<std::vector<double>> q(leaves);
  double y_hat = 0.0;
  for (int l = 0; l < leaves; ++l) {
    q[l] = tree.LeafDistribution(l);
    y_hat += trace.leaf_probability[l] * q[l][label];
  }

  TreeGradient grad;
  grad.prototypes.assign(tree.prototypes().size(), 0.0);
  grad.logits.assign(tree.logits().size(), 0.0);
  if (loss) *loss = -std::log(std::max(y_hat, kProbabilityFloor));
  // Below the floor the loss is constant.
  if (y_hat < kProbabilityFloor) return grad;

  for (int l = 0; l < leaves; ++l) {
    const double scale = -trace.leaf_probability[l] * q[l][label] / y_hat;
    for (int k = 0; k < classes; ++k) {
      grad.logits[static_cast<std::size_t>(l) * classes + k] =
          scale * ((k == label ? 1.0 : 0.0) - q[l][k]);
    }
  }

  // expected[n]: probability of the label given that node n is reached.
  std::vector<double> expected(static_cast<std::size_t>(2) * leaves, 0.0);
  for (int l = 0; l < leaves; ++l) expected[leaves + l] = q[l][label];
  for (int n = internal; n >= 1; --n) {
    const double s = sims[n - 1];
    expected[n] = (1.0 - s) * expected[2 * n] + s * expected[2 * n + 1];
  }

  const int dim = tree.feature_dim();
  for (int n = 1; n <= internal; ++n) {
    const NodeRouting& node = trace.nodes[n - 1];
    const double dloss_ds =
        -reach[n] * (expected[2 * n + 1] - expected[2 * n]) / y_hat;
    const double denom = std::sqrt(node.squared_distance + kDistanceEpsilon);
    const double factor = dloss_ds * (-node.similarity) / denom;
    const std::span<const double> p = tree.prototype(n);
    const std::span<const float> z =
        fm.patch(node.location.row, node.location.col);
    double* g = grad.prototypes.data() + static_cast<std::size_t>(n - 1) * dim;
    for (int i = 0; i < dim; ++i) {
      g[i] = factor * (p[i] - static_cast<double>(z[i]));
    }
  }
  return grad;
}

PrototypeTree ProjectPrototypes(const PrototypeTree& tree,
                                std::span<const FeatureMap> maps,
                                std::span<const std::string> source_ids) {
  if (maps.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty training set");
  }
  if (!source_ids.empty() && source_ids.size() != maps.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one source id per map");
  }
  for (const FeatureMap& fm : maps) CheckDepth(tree, fm);
  PrototypeTree out = tree;
  out.clear_provenance();
  for (int n = 1; n <= tree.num_internal(); ++n) {
    std::size_t best_map = 0;
    NearestPatch best;
    best.squared_distance = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < maps.size(); ++m) {
      const NearestPatch np = FindNearestPatch(maps[m], tree.prototype(n));
      if (np.squared_distance < best.squared_distance) {
        best = np;
        best_map = m;
      }
    }
    const std::span<const float> z =
        maps[best_map].patch(best.location.row, best.location.col);
    std::span<double> p = out.prototype(n);
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = z[i];
    Provenance prov;
    prov.map_index = best_map;
    prov.source_id =
        source_ids.empty() ? std::to_string(best_map) : source_ids[best_map];
    prov.location = best.location;
    out.set_provenance(n, std::move(prov));
  }
  return out;
}

HardRoute ComputeHardRoute(const PrototypeTree& tree, const FeatureMap& fm,
                           double threshold) {
  CheckDepth(tree, fm);
  HardRoute route;
  int n = 1;
  while (n < tree.num_leaves()) {
    const double s =
        Similarity(FindNearestPatch(fm, tree.prototype(n)).distance);
    const bool right = s >= threshold;
    route.path.push_back(n);
    route.went_right.push_back(right);
    route.similarity.push_back(s);
    n = 2 * n + (right ? 1 : 0);
  }
  route.leaf = n - tree.num_leaves();
  route.distribution = tree.LeafDistribution(route.leaf);
  return route;
}

}  // namespace protoscope
