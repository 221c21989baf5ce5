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

#include "protoscope/features.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "protoscope/error.h"
#include "protoscope/rng.h"

namespace protoscope {
namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(std::span<const std::uint8_t> bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
  return v;
}

struct LayerGeometry {
  int in_size;
  int out_size;
  int pad_before;
};

LayerGeometry Geometry(int in_size, const ConvLayerSpec& layer) {
  const int out = (in_size + layer.stride - 1) / layer.stride;
  const int total =
      std::max((out - 1) * layer.stride + layer.kernel - in_size, 0);
  return {in_size, out, total / 2};
}

}  // namespace

FeatureMap::FeatureMap(int height, int width, int depth)
    : height_(height), width_(width), depth_(depth) {
  if (height < 1 || width < 1 || depth < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "feature map dimensions must be >= 1");
  }
  values_.assign(static_cast<std::size_t>(height) * width * depth, 0.0f);
}

FeatureMap::FeatureMap(int height, int width, int depth,
                       std::vector<float> values)
    : FeatureMap(height, width, depth) {
  if (values.size() != values_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(values_.size()) + " values, got " +
                    std::to_string(values.size()));
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "feature value");
  }
  values_ = std::move(values);
}

std::vector<std::uint8_t> EncodeFeatureMap(const FeatureMap& fm) {
  std::vector<std::uint8_t> out;
  out.reserve(20 + fm.values().size() * 4);
  out.insert(out.end(), {'F', 'M', 'A', 'P'});
  PutU32(out, kFmapVersion);
  PutU32(out, static_cast<std::uint32_t>(fm.height()));
  PutU32(out, static_cast<std::uint32_t>(fm.width()));
  PutU32(out, static_cast<std::uint32_t>(fm.depth()));
  for (float v : fm.values()) PutU32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureMap DecodeFeatureMap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FMAP", 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "expected \"FMAP\"");
  }
  if (bytes.size() < 20) {
    throw Error(ErrorCode::kTruncatedPayload, "header shorter than 20 bytes");
  }
  const std::uint32_t version = GetU32(bytes, 4);
  if (version != kFmapVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "FMAP version " + std::to_string(version));
  }
  const std::uint64_t h = GetU32(bytes, 8);
  const std::uint64_t w = GetU32(bytes, 12);
  const std::uint64_t d = GetU32(bytes, 16);
  if (h == 0 || w == 0 || d == 0 || h > (1u << 30) || w > (1u << 30) ||
      d > (1u << 30)) {
    throw Error(ErrorCode::kMalformed, "FMAP dimension out of range");
  }
  const std::uint64_t count = h * w * d;
  const std::uint64_t available = (bytes.size() - 20) / 4;
  if (available < count) {
    throw Error(ErrorCode::kTruncatedPayload,
                "header declares " + std::to_string(count) + " floats, found " +
                    std::to_string(available));
  }
  if (bytes.size() != 20 + count * 4) {
    throw Error(ErrorCode::kMalformed, "trailing bytes after payload");
  }
  std::vector<float> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<float>(GetU32(bytes, 20 + 4 * i));
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kNonFinite, "value " + std::to_string(i));
    }
  }
  return FeatureMap(static_cast<int>(h), static_cast<int>(w),
                    static_cast<int>(d), std::move(values));
}

void SaveFeatureMap(const FeatureMap& fm, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = EncodeFeatureMap(fm);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, path.string());
}

FeatureMap LoadFeatureMap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return DecodeFeatureMap(bytes);
}

BackboneArch BackboneArch::Default(int input_size) {
  BackboneArch arch;
  arch.input_size = input_size;
  arch.input_channels = 3;
  arch.layers = {{3, 2, 16, true}, {3, 2, 32, true}, {3, 2, 64, true}};
  return arch;
}

void BackboneArch::Validate() const {
  if (input_size < 1 || input_channels < 1 || layers.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "malformed backbone arch");
  }
  for (const ConvLayerSpec& l : layers) {
    if (l.kernel < 1 || l.stride < 1 || l.out_channels < 1) {
      throw Error(ErrorCode::kInvalidArgument, "malformed backbone layer");
    }
  }
}

int BackboneArch::OutputSize() const {
  int size = input_size;
  for (const ConvLayerSpec& l : layers) size = Geometry(size, l).out_size;
  return size;
}

int BackboneArch::OutputDepth() const {
  return layers.empty() ? input_channels : layers.back().out_channels;
}

int BackboneArch::TotalStride() const {
  int stride = 1;
  for (const ConvLayerSpec& l : layers) stride *= l.stride;
  return stride;
}

int BackboneArch::ReceptiveField() const {
  int rf = 1;
  int jump = 1;
  for (const ConvLayerSpec& l : layers) {
    rf += (l.kernel - 1) * jump;
    jump *= l.stride;
  }
  return rf;
}

FrozenBackbone FrozenBackbone::Init(std::uint64_t seed,
                                    const BackboneArch& arch) {
  arch.Validate();
  FrozenBackbone net;
  net.arch_ = arch;
  net.seed_ = seed;
  RngStream rng(seed);
  int in_ch = arch.input_channels;
  for (const ConvLayerSpec& l : arch.layers) {
    const int fan_in = in_ch * l.kernel * l.kernel;
    const double bound = std::sqrt(6.0 / fan_in);
    std::vector<float> w(static_cast<std::size_t>(l.out_channels) * fan_in);
    for (float& v : w) {
      float f = static_cast<float>(-bound + 2.0 * bound * rng.NextUnit());
      if (std::abs(static_cast<double>(f)) > bound) {
        f = std::nextafter(f, 0.0f);
      }
      v = f;
    }
    net.weights_.push_back(std::move(w));
    net.biases_.emplace_back(l.out_channels, 0.0f);
    in_ch = l.out_channels;
  }
  net.PackKernels();
  return net;
}

FrozenBackbone FrozenBackbone::FromWeights(
    const BackboneArch& arch, std::vector<std::vector<float>> weights,
    std::vector<std::vector<float>> biases) {
  arch.Validate();
  if (weights.size() != arch.layers.size() ||
      biases.size() != arch.layers.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "layer count");
  }
  int in_ch = arch.input_channels;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const ConvLayerSpec& l = arch.layers[i];
    if (weights[i].size() != static_cast<std::size_t>(l.out_channels) * in_ch *
                                 l.kernel * l.kernel ||
        biases[i].size() != static_cast<std::size_t>(l.out_channels)) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "weights for layer " + std::to_string(i));
    }
    in_ch = l.out_channels;
  }
  FrozenBackbone net;
  net.arch_ = arch;
  net.weights_ = std::move(weights);
  net.biases_ = std::move(biases);
  net.PackKernels();
  return net;
}

void FrozenBackbone::PackKernels() {
  packed_.clear();
  int in_ch = arch_.input_channels;
  for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
    const ConvLayerSpec& l = arch_.layers[i];
    const int k = l.kernel;
    const int out_ch = l.out_channels;
    std::vector<float> p(weights_[i].size());
    for (int o = 0; o < out_ch; ++o) {
      for (int c = 0; c < in_ch; ++c) {
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            p[((static_cast<std::size_t>(ky) * k + kx) * in_ch + c) * out_ch +
              o] =
                weights_[i]
                        [((static_cast<std::size_t>(o) * in_ch + c) * k + ky) *
                             k +
                         kx];
          }
        }
      }
    }
    packed_.push_back(std::move(p));
    in_ch = out_ch;
  }
}

FeatureMap FrozenBackbone::Extract(const NormalizedTensor& tensor) const {
  if (tensor.height != arch_.input_size || tensor.width != arch_.input_size) {
    throw Error(ErrorCode::kDimensionMismatch,
                "tensor " + std::to_string(tensor.height) + "x" +
                    std::to_string(tensor.width) + ", backbone expects " +
                    std::to_string(arch_.input_size));
  }
  if (arch_.input_channels != 3) {
    throw Error(ErrorCode::kDimensionMismatch, "backbone expects 3 channels");
  }
  std::vector<float> in = tensor.data;
  int size = tensor.height;
  int in_ch = 3;
  for (std::size_t li = 0; li < arch_.layers.size(); ++li) {
    const ConvLayerSpec& l = arch_.layers[li];
    const LayerGeometry g = Geometry(size, l);
    const int out_ch = l.out_channels;
    const int k = l.kernel;
    const std::vector<float>& w = packed_[li];
    const std::vector<float>& b = biases_[li];
    std::vector<float> out(static_cast<std::size_t>(g.out_size) * g.out_size *
                           out_ch);
    std::vector<float> acc(out_ch);
    for (int oy = 0; oy < g.out_size; ++oy) {
      for (int ox = 0; ox < g.out_size; ++ox) {
        std::copy(b.begin(), b.end(), acc.begin());
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * l.stride - g.pad_before + ky;
          if (iy < 0 || iy >= size) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * l.stride - g.pad_before + kx;
            if (ix < 0 || ix >= size) continue;
            const float* px =
                &in[(static_cast<std::size_t>(iy) * size + ix) * in_ch];
            const float* wk =
                &w[(static_cast<std::size_t>(ky) * k + kx) * in_ch * out_ch];
            for (int c = 0; c < in_ch; ++c) {
              const float v = px[c];
              if (v == 0.0f) continue;
              const float* wc = wk + static_cast<std::size_t>(c) * out_ch;
              for (int o = 0; o < out_ch; ++o) acc[o] += v * wc[o];
            }
          }
        }
        float* dst =
            &out[(static_cast<std::size_t>(oy) * g.out_size + ox) * out_ch];
        for (int o = 0; o < out_ch; ++o) {
          dst[o] = l.relu ? std::max(acc[o], 0.0f) : acc[o];
        }
      }
    }
    in = std::move(out);
    size = g.out_size;
    in_ch = out_ch;
  }
  return FeatureMap(size, size, in_ch, std::move(in));
}

}  // namespace protoscope
