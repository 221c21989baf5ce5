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

#ifndef PROTOSCOPE_RASTER_H_
#define PROTOSCOPE_RASTER_H_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace protoscope {

// RGB image with intensities in [0, 1], interleaved row-major (HWC).
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  // Black image. Throws kInvalidArgument unless height, width >= 1.
  RasterImage(int height, int width);
  RasterImage(int height, int width, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return data_.empty(); }

  float at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  float& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  // 8-bit view, round(v * 255) after clamping.
  std::vector<std::uint8_t> ToBytes() const;
  static RasterImage FromBytes(int height, int width,
                               const std::vector<std::uint8_t>& rgb);

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

// Binary foreground mask. An all-false mask is representable; consumers decide
// what it means.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, bool value = false);

  int height() const { return height_; }
  int width() const { return width_; }

  bool at(int y, int x) const {
    return data_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int y, int x, bool v) {
    data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }

  std::size_t CountTrue() const;
  const std::vector<std::uint8_t>& data() const { return data_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

// Decoded 8-bit raster before channel policy is applied.
struct DecodedRaster {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB); alpha is dropped
  std::vector<std::uint8_t> bytes;
};

// PNG (gray, gray+alpha, RGB, RGBA; alpha dropped) or binary PPM (P6, maxval
// 255), sniffed from content.
DecodedRaster DecodeRasterFile(const std::filesystem::path& path);

// Gray inputs are replicated to three channels.
RasterImage LoadImage(const std::filesystem::path& path);

// Format chosen by extension: ".ppm" writes P6, anything else writes PNG.
void SaveImage(const RasterImage& img, const std::filesystem::path& path);

// 8-bit single-channel PNG, 255 = true.
void SaveMaskPng(const Mask& mask, const std::filesystem::path& path);

// Bilinear, half-pixel centers, coordinates clamped to the border.
RasterImage ResizeBilinear(const RasterImage& img, int out_h, int out_w);

// Single-channel variant of ResizeBilinear used for heatmaps.
std::vector<double> ResizeBilinearPlane(const std::vector<double>& plane,
                                        int in_h, int in_w, int out_h,
                                        int out_w);

// Rotates counter-clockwise (as displayed, y pointing down) about the image
// center. Samples falling outside the source are black.
RasterImage Rotate(const RasterImage& img, double angle_degrees);

RasterImage FlipHorizontal(const RasterImage& img);

// Throws kOutOfBounds unless the rectangle lies inside the image.
RasterImage Crop(const RasterImage& img, int top, int left, int height,
                 int width);

// Rec.601 luma.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

// brightness (scale), then contrast (blend with gray mean), then saturation
// (blend with per-pixel luma). Each step clamps to [0, 1]. A factor of exactly
// 1 skips its step. Throws kInvalidArgument for non-positive brightness or
// contrast, or negative saturation.
RasterImage AdjustColor(const RasterImage& img, double brightness,
                        double contrast, double saturation);

}  // namespace protoscope

#endif  // PROTOSCOPE_RASTER_H_
