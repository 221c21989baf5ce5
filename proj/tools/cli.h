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

#ifndef PROTOSCOPE_TOOLS_CLI_H_
#define PROTOSCOPE_TOOLS_CLI_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "protoscope/augment.h"
#include "protoscope/features.h"

namespace protoscope::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPartial = 2;

// Label vocabulary of the manifest, in class-index order.
inline constexpr const char* kClassNames[] = {"female", "male"};

struct ManifestRow {
  std::string image_path;  // as written, relative to the manifest
  int label = 0;
  int session = 0;
  std::string mask_path;  // empty when absent
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRow> rows;

  std::filesystem::path Resolve(const std::string& relative) const {
    return base_dir / relative;
  }
};

// CSV with a header naming image_path, label and session, plus an optional
// mask_path column, in any order. Throws kMalformed on bad rows, unknown
// labels or sessions, and duplicate image paths.
Manifest ParseManifest(std::istream& in, const std::filesystem::path& base);
// Also checks that every image (and mask, when given) exists. Throws
// kUnreadableFile otherwise.
Manifest LoadManifest(const std::filesystem::path& path);

enum class RoiSource { kHeuristic, kMaskFiles, kNone };

const char* RoiSourceName(RoiSource roi);
RoiSource ParseRoiSource(const std::string& name);

struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<int> session;
  bool pooled = false;
  AugmentPreset preset;  // id -1 for a custom op list
  std::optional<int> kfold;
  double threshold = 0.5;
  double test_fraction = 0.2;
  // "seeded" or an FMAP directory mirroring the manifest layout.
  std::string backbone = "seeded";
  std::optional<std::uint64_t> backbone_seed;  // defaults to seed
  BackboneArch arch = BackboneArch::Default();
  Normalization normalization;
  RoiSource roi = RoiSource::kHeuristic;
  std::filesystem::path out = "out";

  double learning_rate = 0.001;
  int batch_size = 16;
  int epochs = 50;
  int depth = 3;

  bool external_backbone() const { return backbone != "seeded"; }
};

// Values given on the command line; unset fields fall through.
struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> session;
  bool pooled = false;
  std::optional<int> preset;
  std::optional<int> kfold;
  std::optional<double> threshold;
  std::optional<std::string> backbone;
  std::optional<std::string> masks;
  std::optional<std::string> out;
};

// Precedence: flag > config file > PROTOSCOPE_SEED (seed only) > default.
// `config_json` may be empty. Throws kInvalidArgument for unknown keys or
// bad values.
RunConfig ResolveRunConfig(const FlagOverrides& flags,
                           const std::string& config_json,
                           const char* env_seed);

// Relative FMAP location for an image: same path, ".fmap" extension.
std::filesystem::path FmapRelativePath(const std::string& image_path);

// Entry point of the protoscope tool. Never throws.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace protoscope::cli

#endif  // PROTOSCOPE_TOOLS_CLI_H_
