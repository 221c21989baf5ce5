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

#ifndef PROTOSCOPE_AUGMENT_H_
#define PROTOSCOPE_AUGMENT_H_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "protoscope/raster.h"
#include "protoscope/rng.h"
#include "protoscope/roi.h"

namespace protoscope {

struct Normalization {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

// Network input: per-channel normalized HWC values plus a per-pixel flag for
// the black letterbox padding.
struct NormalizedTensor {
  int height = 0;
  int width = 0;
  std::vector<float> data;
  std::vector<std::uint8_t> pad_flag;
  Normalization norm;

  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  // Normalized value of a black pixel for channel c.
  float BlackValue(int c) const;
  // Inverse normalization, clamped to [0, 1].
  RasterImage Denormalize() const;

  friend bool operator==(const NormalizedTensor&,
                         const NormalizedTensor&) = default;
};

// Aspect-preserving resize so the longer side equals target, centered on a
// black target x target canvas (odd remainders go to bottom/right), then
// (v - mean) / std.
NormalizedTensor BaseTransform(const RasterImage& img, int target,
                               const Normalization& norm = {});

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Values drawn by the stochastic ops, for inspection and tests.
struct AugmentTrace {
  std::optional<double> rotation_degrees;
  std::optional<bool> flipped;
  std::optional<std::array<double, 3>> color_factors;
  std::optional<BoundingBox> crop;
  std::optional<BoundingBox> erased;
  std::optional<double> erased_fraction;
};

struct AugmentParams {
  Range rotation_degrees{-15.0, 15.0};
  double hflip_probability = 0.5;
  Range brightness{0.8, 1.2};
  Range contrast{0.8, 1.2};
  Range saturation{0.8, 1.2};
  Range crop_scale{0.8, 1.0};
  Range crop_aspect{0.9, 1.1};
  int crop_attempts = 10;
  double erase_probability = 0.5;
  Range erase_area{0.02, 0.4};
  Range erase_aspect{0.3, 3.33};
  int erase_attempts = 100;
  int target_size = 224;
  Normalization norm;
};

RasterImage RandomRotation(const RasterImage& img, RngStream& rng,
                           Range degrees = {-15.0, 15.0},
                           AugmentTrace* trace = nullptr);

RasterImage RandomHorizontalFlip(const RasterImage& img, RngStream& rng,
                                 double p = 0.5, AugmentTrace* trace = nullptr);

RasterImage RandomColorJitter(const RasterImage& img, RngStream& rng,
                              Range brightness = {0.8, 1.2},
                              Range contrast = {0.8, 1.2},
                              Range saturation = {0.8, 1.2},
                              AugmentTrace* trace = nullptr);

// Area fraction and aspect (width / height) drawn uniformly; a candidate is
// accepted when it fits and its realized area fraction lies in scale. Falls
// back to the full frame after `attempts` rejections.
RasterImage RandomCrop(const RasterImage& img, RngStream& rng,
                       Range scale = {0.8, 1.0}, Range aspect = {0.9, 1.1},
                       int attempts = 10, AugmentTrace* trace = nullptr);

// With probability p erases one rectangle whose realized area fraction lies in
// `area` (aspect = height / width). Identity when no placement is found within
// `attempts`.
NormalizedTensor RandomErasing(const NormalizedTensor& tensor, RngStream& rng,
                               double p = 0.5, Range area = {0.02, 0.4},
                               Range aspect = {0.3, 3.33}, int attempts = 100,
                               AugmentTrace* trace = nullptr);
RasterImage RandomErasing(const RasterImage& img, RngStream& rng,
                          double p = 0.5, Range area = {0.02, 0.4},
                          Range aspect = {0.3, 3.33}, int attempts = 100,
                          AugmentTrace* trace = nullptr);

enum class AugmentOp {
  kRotation,
  kHorizontalFlip,
  kColorJitter,
  kRandomCrop,
  kRandomErasing,
};

// Base transform is implicit and always present.
struct AugmentPreset {
  int id = 0;  // -1 for custom op lists
  bool rotation = false;
  bool hflip = false;
  bool color_jitter = false;
  bool crop = false;
  bool erasing = false;

  bool IsDeterministic() const {
    return !(rotation || hflip || color_jitter || crop || erasing);
  }
};

// Ids 0-5:
//   0 base
//   1 base + rotation + horizontal flip
//   2 base + color jitter
//   3 base + random crop
//   4 base + random erasing
//   5 base + rotation + horizontal flip + random crop + random erasing
// Throws kInvalidArgument for other ids.
AugmentPreset PresetFromId(int id);

// Names: "rotation", "hflip", "color_jitter", "random_crop",
// "random_erasing" ("base" is accepted and ignored).
AugmentPreset PresetFromOps(const std::vector<std::string>& ops);
std::vector<std::string> PresetOps(const AugmentPreset& preset);

// rotation -> hflip -> color_jitter -> crop -> base_transform -> erasing.
NormalizedTensor ApplyPreset(const RasterImage& img,
                             const AugmentPreset& preset, RngStream& rng,
                             const AugmentParams& params = {},
                             AugmentTrace* trace = nullptr);

}  // namespace protoscope

#endif  // PROTOSCOPE_AUGMENT_H_
