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

#ifndef PROTOSCOPE_FEATURES_H_
#define PROTOSCOPE_FEATURES_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "protoscope/augment.h"

namespace protoscope {

// H' x W' x D grid, channel-fastest row-major:
// index = ((row * width) + col) * depth + channel.
class FeatureMap {
 public:
  FeatureMap() = default;
  // Zero-filled. Throws kInvalidArgument unless all dimensions are >= 1.
  FeatureMap(int height, int width, int depth);
  // Throws kDimensionMismatch on size mismatch and kNonFinite on NaN/Inf.
  FeatureMap(int height, int width, int depth, std::vector<float> values);

  int height() const { return height_; }
  int width() const { return width_; }
  int depth() const { return depth_; }
  int locations() const { return height_ * width_; }

  std::span<const float> patch(int row, int col) const {
    return {values_.data() + Offset(row, col),
            static_cast<std::size_t>(depth_)};
  }
  std::span<float> patch(int row, int col) {
    return {values_.data() + Offset(row, col),
            static_cast<std::size_t>(depth_)};
  }

  const std::vector<float>& values() const { return values_; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t Offset(int row, int col) const {
    return (static_cast<std::size_t>(row) * width_ + col) * depth_;
  }

  int height_ = 0;
  int width_ = 0;
  int depth_ = 0;
  std::vector<float> values_;
};

// FMAP v1: "FMAP", u32 version, u32 H', u32 W', u32 D, then H'*W'*D f32,
// all little-endian.
inline constexpr std::uint32_t kFmapVersion = 1;

std::vector<std::uint8_t> EncodeFeatureMap(const FeatureMap& fm);
// Errors: kBadMagic, kVersionMismatch, kTruncatedPayload, kNonFinite,
// kMalformed (zero dimension or trailing bytes).
FeatureMap DecodeFeatureMap(std::span<const std::uint8_t> bytes);
void SaveFeatureMap(const FeatureMap& fm, const std::filesystem::path& path);
FeatureMap LoadFeatureMap(const std::filesystem::path& path);

struct ConvLayerSpec {
  int kernel = 3;
  int stride = 2;
  int out_channels = 16;
  bool relu = true;

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct BackboneArch {
  int input_size = 224;
  int input_channels = 3;
  std::vector<ConvLayerSpec> layers;

  // Three [3x3 conv, stride 2, same padding, ReLU] blocks, 16 -> 32 -> 64.
  static BackboneArch Default(int input_size = 224);

  // Throws kInvalidArgument for an empty layer list or non-positive fields.
  void Validate() const;
  int OutputSize() const;
  int OutputDepth() const;
  int TotalStride() const;
  int ReceptiveField() const;

  friend bool operator==(const BackboneArch&, const BackboneArch&) = default;
};

// Frozen convolutional feature extractor. Weights are drawn once from the seed
// and there is no API that mutates them or produces their gradients.
class FrozenBackbone {
 public:
  // He-uniform weights in [-sqrt(6 / fan_in), sqrt(6 / fan_in)] from
  // SplitMix64(seed), layer by layer in [out][in][ky][kx] order; zero biases.
  static FrozenBackbone Init(
      std::uint64_t seed, const BackboneArch& arch = BackboneArch::Default());

  // Explicit weights ([out][in][ky][kx] per layer); for tests and identity
  // constructions.
  static FrozenBackbone FromWeights(const BackboneArch& arch,
                                    std::vector<std::vector<float>> weights,
                                    std::vector<std::vector<float>> biases);

  const BackboneArch& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const float> weights(std::size_t layer) const {
    return weights_.at(layer);
  }
  std::span<const float> biases(std::size_t layer) const {
    return biases_.at(layer);
  }

  // Throws kDimensionMismatch unless the tensor is input_size square.
  FeatureMap Extract(const NormalizedTensor& tensor) const;

 private:
  FrozenBackbone() = default;
  void PackKernels();

  BackboneArch arch_;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<float>> weights_;
  std::vector<std::vector<float>> biases_;
  // Same weights re-laid out as [ky][kx][in][out] for the inner loop.
  std::vector<std::vector<float>> packed_;
};

}  // namespace protoscope

#endif  // PROTOSCOPE_FEATURES_H_
