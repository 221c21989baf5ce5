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

#include "protoscope/checkpoint.h"

#include <gtest/gtest.h>

#include <cmath>

#include "protoscope/rng.h"
#include "support/expect_error.h"
#include "support/oracles.h"

namespace protoscope {
namespace {

using ::protoscope::testing::RandomFeatureMap;
using ::protoscope::testing::RandomTree;

Checkpoint SampleCheckpoint() {
  RngStream rng(31);
  Checkpoint ckpt;
  ckpt.tree = RandomTree(rng, 2, 4, 2);
  // Values that need all 17 significant digits to survive a text round trip.
  ckpt.tree.prototypes()[0] = 0.1 + 0.2;
  ckpt.tree.prototypes()[1] = -1.0 / 3.0;
  ckpt.tree.logits()[0] = 5e-324;
  ckpt.tree.logits()[1] = -0.0;
  ckpt.backbone.seed = 99;
  ckpt.backbone.arch = BackboneArch::Default(64);
  ckpt.normalization = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}};
  ckpt.preset = 5;
  ckpt.training.seed = 7;
  ckpt.training.session = 2;
  ckpt.training.kfold = 5;
  ckpt.training.fold = 3;
  ckpt.training.roi = "heuristic";
  return ckpt;
}

TEST(CheckpointTest, RoundTripIsExact) {
  const Checkpoint ckpt = SampleCheckpoint();
  const Checkpoint back = DeserializeCheckpoint(SerializeCheckpoint(ckpt));
  EXPECT_EQ(back, ckpt);
  EXPECT_TRUE(std::signbit(back.tree.logits()[1]));
  EXPECT_EQ(SerializeCheckpoint(back), SerializeCheckpoint(ckpt));
}

TEST(CheckpointTest, RoundTripPreservesPredictionsBitExactly) {
  const Checkpoint ckpt = SampleCheckpoint();
  testing::TempDir dir("ckpt");
  SaveCheckpoint(ckpt, dir.path() / "c.json");
  const Checkpoint back = LoadCheckpoint(dir.path() / "c.json");
  RngStream rng(32);
  const FeatureMap probe = RandomFeatureMap(rng, 3, 3, 4);
  EXPECT_EQ(Predict(back.tree, probe).distribution,
            Predict(ckpt.tree, probe).distribution);
}

TEST(CheckpointTest, ProjectionAndExternalBackboneSurvive) {
  Checkpoint ckpt = SampleCheckpoint();
  ckpt.backbone.kind = BackboneSpec::Kind::kExternal;
  ckpt.backbone.external_dir = "/data/fmaps";
  ckpt.training.session.reset();
  RngStream rng(33);
  const std::vector<FeatureMap> maps = {RandomFeatureMap(rng, 2, 2, 4),
                                        RandomFeatureMap(rng, 2, 3, 4)};
  const std::vector<std::string> ids = {"a.png", "b.png"};
  ckpt.tree = ProjectPrototypes(ckpt.tree, maps, ids);
  EXPECT_EQ(DeserializeCheckpoint(SerializeCheckpoint(ckpt)), ckpt);
}

TEST(CheckpointTest, UnprojectedHasNullProjection) {
  const std::string text = SerializeCheckpoint(SampleCheckpoint());
  EXPECT_NE(text.find("\"projection\": null"), std::string::npos);
  EXPECT_TRUE(DeserializeCheckpoint(text).tree.provenance().empty());
}

std::string Replace(std::string text, const std::string& from,
                    const std::string& to) {
  const std::size_t pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return text.replace(pos, from.size(), to);
}

TEST(CheckpointTest, CorruptInputsAreRejected) {
  const std::string good = SerializeCheckpoint(SampleCheckpoint());
  EXPECT_PROTOSCOPE_ERROR(kMalformed, DeserializeCheckpoint("{"));
  EXPECT_PROTOSCOPE_ERROR(kMalformed, DeserializeCheckpoint("[]"));
  EXPECT_PROTOSCOPE_ERROR(
      kMalformed,
      DeserializeCheckpoint(Replace(good, "protoscope-checkpoint", "other")));
  EXPECT_PROTOSCOPE_ERROR(
      kVersionMismatch,
      DeserializeCheckpoint(Replace(good, "\"version\": 1", "\"version\": 2")));
  EXPECT_PROTOSCOPE_ERROR(
      kDimensionMismatch,
      DeserializeCheckpoint(Replace(good, "\"depth\": 2", "\"depth\": 3")));
  EXPECT_PROTOSCOPE_ERROR(
      kMalformed, DeserializeCheckpoint(Replace(good, "\"kind\": \"seeded\"",
                                                "\"kind\": \"magic\"")));
  EXPECT_PROTOSCOPE_ERROR(
      kMalformed, DeserializeCheckpoint(
                      Replace(good, "\"preset\": 5", "\"preset\": \"x\"")));
  EXPECT_PROTOSCOPE_ERROR(
      kMalformed, DeserializeCheckpoint(Replace(good, "\"depth\": 2,", "")));
}

TEST(CheckpointTest, RowLengthMismatch) {
  std::string text = SerializeCheckpoint(SampleCheckpoint());
  text = Replace(text, "\"feature_dim\": 4", "\"feature_dim\": 5");
  EXPECT_PROTOSCOPE_ERROR(kDimensionMismatch, DeserializeCheckpoint(text));
}

TEST(CheckpointTest, MissingFile) {
  EXPECT_PROTOSCOPE_ERROR(kUnreadableFile,
                          LoadCheckpoint("/nonexistent/ckpt.json"));
}

TEST(CheckpointTest, TreeWrappers) {
  testing::TempDir dir("tree");
  const PrototypeTree tree = SampleCheckpoint().tree;
  SaveTree(tree, dir.path() / "t.json");
  EXPECT_EQ(LoadTree(dir.path() / "t.json"), tree);
}

}  // namespace
}  // namespace protoscope
