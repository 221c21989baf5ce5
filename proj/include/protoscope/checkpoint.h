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

#ifndef PROTOSCOPE_CHECKPOINT_H_
#define PROTOSCOPE_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "protoscope/augment.h"
#include "protoscope/features.h"
#include "protoscope/prototree.h"

namespace protoscope {

inline constexpr int kCheckpointVersion = 1;

struct BackboneSpec {
  enum class Kind { kSeeded, kExternal };
  Kind kind = Kind::kSeeded;
  std::uint64_t seed = 0;
  BackboneArch arch = BackboneArch::Default();
  std::string external_dir;  // FMAP directory for kExternal

  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

// How the split used for training can be rebuilt from a manifest.
struct TrainingProvenance {
  std::uint64_t seed = 0;
  std::optional<int> session;  // nullopt when pooled
  double test_fraction = 0.2;
  std::optional<int> kfold;
  std::optional<int> fold;
  std::string roi = "none";

  friend bool operator==(const TrainingProvenance&,
                         const TrainingProvenance&) = default;
};

struct Checkpoint {
  PrototypeTree tree;
  BackboneSpec backbone;
  Normalization normalization;
  int preset = 0;
  TrainingProvenance training;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// JSON text. Doubles are written in shortest round-trip form, so
// Deserialize(Serialize(c)) == c bit for bit.
std::string SerializeCheckpoint(const Checkpoint& ckpt);
// Throws kMalformed, kVersionMismatch, kDimensionMismatch or kNonFinite.
Checkpoint DeserializeCheckpoint(const std::string& text);

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

// Tree-only convenience wrappers using default metadata.
void SaveTree(const PrototypeTree& tree, const std::filesystem::path& path);
PrototypeTree LoadTree(const std::filesystem::path& path);

}  // namespace protoscope

#endif  // PROTOSCOPE_CHECKPOINT_H_
