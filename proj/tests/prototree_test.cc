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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "protoscope/rng.h"
#include "support/expect_error.h"
#include "support/oracles.h"

namespace protoscope {
namespace {

using ::protoscope::testing::OraclePredict;
using ::protoscope::testing::RandomFeatureMap;
using ::protoscope::testing::RandomTree;

FeatureMap Map1D(int h, int w, std::vector<float> v) {
  return FeatureMap(h, w, 1, std::move(v));
}

// Depth-1 tree on D = 1 whose root similarity against a single-cell map at
// value 0 is s, i.e. prototype = -ln(s) away.
FeatureMap ZeroMap() { return Map1D(1, 1, {0.0f}); }

TEST(NearestPatchTest, SingleCandidate) {
  const FeatureMap fm(1, 1, 3, {1.0f, 2.0f, 2.0f});
  const std::vector<double> p = {0.0, 0.0, 0.0};
  const NearestPatch n = FindNearestPatch(fm, p);
  EXPECT_EQ(n.location, (PatchLocation{0, 0}));
  EXPECT_DOUBLE_EQ(n.distance, 3.0);
  EXPECT_DOUBLE_EQ(n.squared_distance, 9.0);
}

TEST(NearestPatchTest, EnumeratedExample) {
  const FeatureMap fm = Map1D(2, 2, {1, 2, 3, 4});
  const std::vector<double> p = {2.9};
  const NearestPatch n = FindNearestPatch(fm, p);
  EXPECT_EQ(n.location, (PatchLocation{1, 0}));
  EXPECT_NEAR(n.distance, 0.1, 1e-12);
}

TEST(NearestPatchTest, TiesGoRowMajorFirst) {
  const FeatureMap fm = Map1D(2, 3, {5, 1, 7, 1, 9, 1});
  const std::vector<double> p = {1.0};
  EXPECT_EQ(FindNearestPatch(fm, p).location, (PatchLocation{0, 1}));
  EXPECT_EQ(FindNearestPatch(fm, p).distance, 0.0);
}

TEST(NearestPatchTest, DimensionMismatch) {
  const std::vector<double> p = {1.0, 2.0};
  EXPECT_PROTOSCOPE_ERROR(kDimensionMismatch, FindNearestPatch(ZeroMap(), p));
}

TEST(SimilarityTest, Values) {
  EXPECT_EQ(Similarity(0.0), 1.0);
  EXPECT_DOUBLE_EQ(Similarity(std::log(2.0)), 0.5);
  EXPECT_NEAR(Similarity(1.0), 0.367879, 1e-6);
  EXPECT_GT(Similarity(0.3), Similarity(0.30001));
}

TEST(LeafProbabilitiesTest, DepthOne) {
  const std::vector<double> s = {0.7};
  const std::vector<double> pi = LeafProbabilities(1, s);
  ASSERT_EQ(pi.size(), 2u);
  EXPECT_NEAR(pi[0], 0.3, 1e-15);
  EXPECT_NEAR(pi[1], 0.7, 1e-15);
}

TEST(LeafProbabilitiesTest, DepthTwoHandMultiplied) {
  const std::vector<double> s = {0.5, 1.0, 0.25};
  const std::vector<double> pi = LeafProbabilities(2, s);
  ASSERT_EQ(pi.size(), 4u);
  EXPECT_DOUBLE_EQ(pi[0], 0.0);
  EXPECT_DOUBLE_EQ(pi[1], 0.5);
  EXPECT_DOUBLE_EQ(pi[2], 0.375);
  EXPECT_DOUBLE_EQ(pi[3], 0.125);
  EXPECT_DOUBLE_EQ(std::accumulate(pi.begin(), pi.end(), 0.0), 1.0);
}

TEST(PredictTest, DepthOneWeightedAverage) {
  PrototypeTree tree(1, 1, 2);
  tree.prototype(1)[0] = std::log(2.0);  // s_root = 0.5 against zero
  tree.leaf_logits(0)[0] = std::log(0.9);
  tree.leaf_logits(0)[1] = std::log(0.1);
  tree.leaf_logits(1)[0] = std::log(0.2);
  tree.leaf_logits(1)[1] = std::log(0.8);
  const Prediction pred = Predict(tree, ZeroMap());
  EXPECT_NEAR(pred.distribution[0], 0.55, 1e-12);
  EXPECT_NEAR(pred.distribution[1], 0.45, 1e-12);
}

TEST(PredictTest, EqualLogitsGiveUniform) {
  RngStream rng(1);
  PrototypeTree tree = RandomTree(rng, 3, 4, 3);
  for (double& c : tree.logits()) c = 0.7;
  const Prediction pred = Predict(tree, RandomFeatureMap(rng, 3, 3, 4));
  for (double p : pred.distribution) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
}

TEST(PredictTest, UnitSimilaritiesSelectRightmostLeaf) {
  RngStream rng(2);
  PrototypeTree tree = RandomTree(rng, 3, 1, 2);
  for (int n = 1; n < 8; ++n) tree.prototype(n)[0] = 0.0;
  const Prediction pred = Predict(tree, ZeroMap());
  EXPECT_EQ(pred.distribution, tree.LeafDistribution(7));
  EXPECT_EQ(pred.trace.hard_leaf, 7);
}

TEST(PredictTest, MatchesBruteForceEnumeration) {
  RngStream rng(3);
  for (int i = 0; i < 50; ++i) {
    const int depth = 1 + int(rng.NextBelow(4));
    const int dim = 1 + int(rng.NextBelow(8));
    const PrototypeTree tree = RandomTree(rng, depth, dim, 2, -0.5, 0.5);
    const FeatureMap fm = RandomFeatureMap(rng, 3, 2, dim, -0.5, 0.5);
    const std::vector<double> got = Predict(tree, fm).distribution;
    const std::vector<double> want = OraclePredict(tree, fm);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(got[k], want[k], 1e-9);
  }
}

TEST(PredictTest, DimensionMismatch) {
  const PrototypeTree tree(2, 3, 2);
  EXPECT_PROTOSCOPE_ERROR(kDimensionMismatch, Predict(tree, ZeroMap()));
}

TEST(CrossEntropyTest, Values) {
  EXPECT_EQ(CrossEntropy(std::vector<double>{1.0, 0.0}, 0), 0.0);
  EXPECT_NEAR(CrossEntropy(std::vector<double>{0.5, 0.5}, 1), 0.693147, 1e-6);
  EXPECT_NEAR(CrossEntropy(std::vector<double>{0.25, 0.75}, 1), 0.287682, 1e-6);
  EXPECT_NEAR(CrossEntropy(std::vector<double>{1.0, 0.0}, 1), -std::log(1e-12),
              1e-9);
  EXPECT_PROTOSCOPE_ERROR(kInvalidArgument,
                          CrossEntropy(std::vector<double>{0.5, 0.5}, 2));
  EXPECT_PROTOSCOPE_ERROR(kInvalidArgument,
                          CrossEntropy(std::vector<double>{0.5, 0.5}, -1));
}

TEST(BackwardTest, LossMatchesPredict) {
  RngStream rng(4);
  const PrototypeTree tree = RandomTree(rng, 2, 3, 2);
  const FeatureMap fm = RandomFeatureMap(rng, 2, 2, 3);
  double loss = 0.0;
  Backward(tree, fm, 1, &loss);
  EXPECT_DOUBLE_EQ(loss, CrossEntropy(Predict(tree, fm), 1));
}

TEST(BackwardTest, ZeroDistanceGivesVanishingPrototypeGradient) {
  RngStream rng(5);
  PrototypeTree tree = RandomTree(rng, 1, 4, 2);
  const FeatureMap fm = RandomFeatureMap(rng, 2, 2, 4);
  for (int d = 0; d < 4; ++d) tree.prototype(1)[d] = fm.patch(1, 0)[d];
  const TreeGradient g = Backward(tree, fm, 0);
  double norm = 0.0;
  for (double v : g.prototypes) norm += v * v;
  EXPECT_LE(std::sqrt(norm), 1e-3);
  for (double v : g.prototypes) EXPECT_TRUE(std::isfinite(v));
}

TEST(BackwardTest, LeafGradientsSumToZeroPerLeaf) {
  RngStream rng(6);
  PrototypeTree tree = RandomTree(rng, 3, 2, 3);
  for (double& c : tree.logits()) c = 0.0;
  const TreeGradient g = Backward(tree, RandomFeatureMap(rng, 2, 3, 2), 2);
  for (int leaf = 0; leaf < 8; ++leaf) {
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) sum += g.logits[leaf * 3 + k];
    EXPECT_NEAR(sum, 0.0, 1e-15);
  }
}

TEST(BackwardTest, MatchesCentralDifferences) {
  RngStream rng(7);
  const double h = 1e-4;
  int checked = 0;
  while (checked < 30) {
    const int depth = 1 + int(rng.NextBelow(3));
    const int dim = 1 + int(rng.NextBelow(8));
    PrototypeTree tree = RandomTree(rng, depth, dim, 2, -0.5, 0.5);
    const FeatureMap fm = RandomFeatureMap(rng, 3, 3, dim, -0.5, 0.5);
    if (testing::ArgminMargin(tree, fm) < 1e-2) continue;
    const int label = int(rng.NextBelow(2));
    const TreeGradient g = Backward(tree, fm, label);
    auto check = [&](std::vector<double>& params,
                     const std::vector<double>& grad) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = params[i];
        params[i] = orig + h;
        const double up = testing::OracleLoss(tree, fm, label);
        params[i] = orig - h;
        const double down = testing::OracleLoss(tree, fm, label);
        params[i] = orig;
        const double fd = (up - down) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        EXPECT_LE(std::abs(fd - grad[i]) / scale, 1e-3)
            << "index " << i << " fd " << fd << " analytic " << grad[i];
      }
    };
    check(tree.prototypes(), g.prototypes);
    check(tree.logits(), g.logits);
    ++checked;
  }
}

TEST(ProjectTest, FixedPointAndForcedPatch) {
  RngStream rng(8);
  PrototypeTree tree = RandomTree(rng, 2, 3, 2);
  const FeatureMap fm = RandomFeatureMap(rng, 2, 2, 3);
  for (int n = 1; n <= 3; ++n) {
    for (int d = 0; d < 3; ++d) tree.prototype(n)[d] = fm.patch(n % 2, 1)[d];
  }
  const std::vector<FeatureMap> maps = {fm};
  const PrototypeTree same = ProjectPrototypes(tree, maps);
  EXPECT_EQ(same.prototypes(), tree.prototypes());

  const FeatureMap one(1, 1, 3, {0.25f, -1.0f, 2.0f});
  const std::vector<FeatureMap> single = {one};
  const PrototypeTree forced = ProjectPrototypes(tree, single);
  for (int n = 1; n <= 3; ++n) {
    for (int d = 0; d < 3; ++d) {
      EXPECT_EQ(forced.prototype(n)[d], double(one.patch(0, 0)[d]));
    }
    ASSERT_TRUE(forced.provenance()[n - 1].has_value());
    EXPECT_EQ(forced.provenance()[n - 1]->map_index, 0u);
  }
}

TEST(ProjectTest, PrototypesBecomeMembersWithProvenance) {
  RngStream rng(9);
  const PrototypeTree tree = RandomTree(rng, 3, 4, 2);
  std::vector<FeatureMap> maps;
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    maps.push_back(RandomFeatureMap(rng, 3, 4, 4));
    ids.push_back("img" + std::to_string(i));
  }
  const PrototypeTree projected = ProjectPrototypes(tree, maps, ids);
  EXPECT_EQ(projected.logits(), tree.logits());
  for (int n = 1; n < 8; ++n) {
    const Provenance& p = *projected.provenance()[n - 1];
    EXPECT_EQ(p.source_id, ids[p.map_index]);
    const auto patch = maps[p.map_index].patch(p.location.row, p.location.col);
    for (int d = 0; d < 4; ++d) {
      EXPECT_EQ(projected.prototype(n)[d], double(patch[d]));
    }
    // Global optimality: no patch anywhere is closer to the old prototype.
    const double chosen =
        testing::OracleMinDistance(maps[p.map_index], tree.prototype(n));
    for (const FeatureMap& m : maps) {
      EXPECT_GE(testing::OracleMinDistance(m, tree.prototype(n)), chosen);
    }
  }
}

TEST(ProjectTest, EmptySetAndBadIds) {
  const PrototypeTree tree(1, 1, 2);
  EXPECT_PROTOSCOPE_ERROR(kInvalidArgument,
                          ProjectPrototypes(tree, std::vector<FeatureMap>{}));
  const std::vector<FeatureMap> maps = {ZeroMap()};
  const std::vector<std::string> ids = {"a", "b"};
  EXPECT_PROTOSCOPE_ERROR(kDimensionMismatch,
                          ProjectPrototypes(tree, maps, ids));
}

TEST(HardRouteTest, ThresholdAndTieRule) {
  PrototypeTree tree(1, 1, 2);
  tree.prototype(1)[0] = -std::log(0.7);
  EXPECT_EQ(ComputeHardRoute(tree, ZeroMap()).leaf, 1);
  // s = 0.5 exactly (exp(-ln 2) rounds to 0.5) goes right.
  tree.prototype(1)[0] = std::log(2.0);
  ASSERT_EQ(Similarity(std::log(2.0)), 0.5);
  EXPECT_EQ(ComputeHardRoute(tree, ZeroMap()).leaf, 1);
  tree.prototype(1)[0] = 1.0;
  const HardRoute r = ComputeHardRoute(tree, ZeroMap());
  EXPECT_EQ(r.leaf, 0);
  EXPECT_EQ(r.path, std::vector<int>{1});
  EXPECT_EQ(r.went_right, std::vector<bool>{false});
  EXPECT_EQ(r.distribution, tree.LeafDistribution(0));
}

TEST(HardRouteTest, SaturatedInstancesAgreeWithArgmaxPi) {
  RngStream rng(10);
  for (int i = 0; i < 200; ++i) {
    const int depth = 1 + int(rng.NextBelow(4));
    PrototypeTree tree(depth, 1, 2);
    for (int n = 1; n < (1 << depth); ++n) {
      // Distance 0.001 (s > 0.99) or 5 (s < 0.01).
      tree.prototype(n)[0] = rng.NextBelow(2) ? 0.001 : 5.0;
    }
    const Prediction pred = Predict(tree, ZeroMap());
    const auto& pi = pred.trace.leaf_probability;
    const int argmax = int(std::max_element(pi.begin(), pi.end()) - pi.begin());
    EXPECT_EQ(ComputeHardRoute(tree, ZeroMap()).leaf, argmax);
  }
}

TEST(PrototypeTreeTest, ShapesAndValidation) {
  const PrototypeTree tree(3, 5, 2);
  EXPECT_EQ(tree.prototypes().size(), 7u * 5u);
  EXPECT_EQ(tree.logits().size(), 8u * 2u);
  EXPECT_TRUE(PrototypeTree::IsInternal(7, 3));
  EXPECT_FALSE(PrototypeTree::IsInternal(8, 3));
  EXPECT_FALSE(PrototypeTree::IsInternal(0, 3));
  EXPECT_PROTOSCOPE_ERROR(kInvalidArgument, PrototypeTree(0, 1, 2));
  EXPECT_PROTOSCOPE_ERROR(kInvalidArgument, PrototypeTree(2, 1, 1));
  EXPECT_PROTOSCOPE_ERROR(kInvalidArgument, PrototypeTree(2, 0, 2));
}

TEST(PrototypeTreeTest, RandomInitIsSmallAndSeeded) {
  const PrototypeTree a = PrototypeTree::Random(3, 16, 2, 42);
  EXPECT_EQ(a, PrototypeTree::Random(3, 16, 2, 42));
  EXPECT_NE(a, PrototypeTree::Random(3, 16, 2, 43));
  double sq = 0.0;
  for (double p : a.prototypes()) sq += p * p;
  // 0.1 * N(0, 1): mean square about 0.01.
  EXPECT_NEAR(sq / a.prototypes().size(), 0.01, 0.006);
}

TEST(PrototypeTreeTest, CheckFiniteCatchesNan) {
  PrototypeTree tree(1, 1, 2);
  tree.logits()[1] = std::nan("");
  EXPECT_PROTOSCOPE_ERROR(kNonFinite, tree.CheckFinite());
}

}  // namespace
}  // namespace protoscope
