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

#ifndef PROTOSCOPE_PROTOTREE_H_
#define PROTOSCOPE_PROTOTREE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protoscope/features.h"

namespace protoscope {

// Added under the square root in the gradient of the distance so that the
// direction (p - z) / dist stays finite at dist = 0.
inline constexpr double kDistanceEpsilon = 1e-12;
// Probability floor applied before the log in the loss.
inline constexpr double kProbabilityFloor = 1e-12;

struct PatchLocation {
  int row = 0;
  int col = 0;

  friend bool operator==(const PatchLocation&, const PatchLocation&) = default;
};

struct NearestPatch {
  PatchLocation location;
  double distance = 0.0;          // Euclidean norm
  double squared_distance = 0.0;  // sum of squares
};

// Where a projected prototype came from.
struct Provenance {
  std::size_t map_index = 0;
  std::string source_id;
  PatchLocation location;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Complete binary tree of prototypes. Internal nodes are numbered 1 ..
// 2^depth - 1 with children 2n and 2n + 1; leaves are numbered left to right
// 0 .. 2^depth - 1 (heap id 2^depth + leaf).
class PrototypeTree {
 public:
  PrototypeTree() = default;
  // Zero prototypes and logits. Throws kInvalidArgument for depth < 1,
  // feature_dim < 1, num_classes < 2.
  PrototypeTree(int depth, int feature_dim, int num_classes);

  // Prototypes and leaf logits ~ 0.1 * N(0, 1) from SplitMix64(seed).
  static PrototypeTree Random(int depth, int feature_dim, int num_classes,
                              std::uint64_t seed);

  int depth() const { return depth_; }
  int feature_dim() const { return feature_dim_; }
  int num_classes() const { return num_classes_; }
  int num_internal() const { return (1 << depth_) - 1; }
  int num_leaves() const { return 1 << depth_; }

  static bool IsInternal(int node, int depth) {
    return node >= 1 && node < (1 << depth);
  }

  std::span<const double> prototype(int node) const;
  std::span<double> prototype(int node);
  std::span<const double> leaf_logits(int leaf) const;
  std::span<double> leaf_logits(int leaf);

  // Softmax of one leaf's logits.
  std::vector<double> LeafDistribution(int leaf) const;

  // Flat parameter storage: prototypes (node-major) then leaf logits.
  const std::vector<double>& prototypes() const { return prototypes_; }
  std::vector<double>& prototypes() { return prototypes_; }
  const std::vector<double>& logits() const { return logits_; }
  std::vector<double>& logits() { return logits_; }

  // Indexed by node - 1; empty when the tree has not been projected.
  const std::vector<std::optional<Provenance>>& provenance() const {
    return provenance_;
  }
  void set_provenance(int node, std::optional<Provenance> p);
  void clear_provenance();

  // Throws kNonFinite if any parameter is NaN/Inf.
  void CheckFinite() const;

  friend bool operator==(const PrototypeTree&, const PrototypeTree&) = default;

 private:
  int depth_ = 0;
  int feature_dim_ = 0;
  int num_classes_ = 0;
  std::vector<double> prototypes_;
  std::vector<double> logits_;
  std::vector<std::optional<Provenance>> provenance_;
};

// argmin over all locations of ||z - p||; ties go to the first location in
// row-major order. Throws kDimensionMismatch when sizes differ.
NearestPatch FindNearestPatch(const FeatureMap& fm,
                              std::span<const double> prototype);

// exp(-distance).
double Similarity(double distance);

struct NodeRouting {
  PatchLocation location;
  double distance = 0.0;
  double squared_distance = 0.0;
  double similarity = 0.0;
};

struct RoutingTrace {
  std::vector<NodeRouting> nodes;  // indexed by node - 1
  std::vector<double> leaf_probability;
  int hard_leaf = 0;  // greedy descent, right iff similarity >= 0.5
};

// Leaf path probabilities from per-node similarities (indexed node - 1):
// the edge to the right child carries s_n and the edge to the left child
// 1 - s_n.
std::vector<double> LeafProbabilities(int depth,
                                      std::span<const double> similarities);

RoutingTrace ComputeRouting(const PrototypeTree& tree, const FeatureMap& fm);

struct Prediction {
  std::vector<double> distribution;
  RoutingTrace trace;
};

// Sum over leaves of pi_leaf * softmax(leaf logits).
Prediction Predict(const PrototypeTree& tree, const FeatureMap& fm);

// -log(max(p[label], 1e-12)). Throws kInvalidArgument for a bad label.
double CrossEntropy(std::span<const double> distribution, int label);
double CrossEntropy(const Prediction& pred, int label);

struct TreeGradient {
  std::vector<double> prototypes;
  std::vector<double> logits;

  void Accumulate(const TreeGradient& other, double scale);
};

// Analytic gradient of the single-sample loss. The nearest-patch location is
// held fixed; d dist / d p uses sqrt(sum of squares + 1e-12) in the
// denominator. No gradient flows to the feature map.
TreeGradient Backward(const PrototypeTree& tree, const FeatureMap& fm,
                      int label, double* loss = nullptr);

// Replaces every prototype by the globally nearest patch over all maps
// (first map, then row-major location, wins ties) and records provenance.
// source_ids may be empty or one id per map. Throws kInvalidArgument for an
// empty set.
PrototypeTree ProjectPrototypes(const PrototypeTree& tree,
                                std::span<const FeatureMap> maps,
                                std::span<const std::string> source_ids = {});

struct HardRoute {
  int leaf = 0;
  std::vector<int> path;           // internal node ids, root first
  std::vector<bool> went_right;    // one per path entry
  std::vector<double> similarity;  // one per path entry
  std::vector<double> distribution;
};

// Greedy descent: right iff s_n >= threshold.
HardRoute ComputeHardRoute(const PrototypeTree& tree, const FeatureMap& fm,
                           double threshold = 0.5);

}  // namespace protoscope

#endif  // PROTOSCOPE_PROTOTREE_H_
