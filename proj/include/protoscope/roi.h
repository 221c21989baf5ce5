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

#ifndef PROTOSCOPE_ROI_H_
#define PROTOSCOPE_ROI_H_

#include <array>
#include <cstdint>
#include <filesystem>

#include "protoscope/raster.h"

namespace protoscope {

struct BoundingBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct SegmentationResult {
  Mask mask;
  BoundingBox bbox;
  double foreground_fraction = 0.0;
};

struct SegmentParams {
  int border_width = 2;
  int morph_kernel = 3;  // odd, square structuring element
  double max_foreground_fraction = 0.9;
};

using Histogram256 = std::array<std::uint64_t, 256>;

// Otsu threshold over a 256-bin histogram. Bins <= threshold are background.
// Ties are broken toward the lowest threshold. Returns -1 when no threshold
// separates two non-empty classes.
int OtsuThreshold(const Histogram256& histogram);

// Between-class variance w0 * w1 * (mu0 - mu1)^2 for a given threshold.
double BetweenClassVariance(const Histogram256& histogram, int threshold);

// Tight axis-aligned hull of the true pixels. Throws kNoForeground when the
// mask is empty.
BoundingBox TightBoundingBox(const Mask& mask);

// Morphology with a k x k square; out-of-image neighbours are ignored.
Mask Erode(const Mask& mask, int kernel);
Mask Dilate(const Mask& mask, int kernel);

// Largest 8-connected component; the first one met in row-major order wins
// ties.
Mask LargestComponent(const Mask& mask);

// Sets every false pixel that is not 4-connected to the image border.
Mask FillHoles(const Mask& mask);

// Border-median background model, RGB distance, Otsu, open/close, largest
// component, hole fill. Throws kNoForeground for empty results or when the
// foreground fraction exceeds params.max_foreground_fraction, and
// kInvalidArgument for images smaller than 8x8.
SegmentationResult SegmentForeground(const RasterImage& img,
                                     const SegmentParams& params = {});

// Single-channel PNG; values > 127 are foreground.
Mask LoadMask(const std::filesystem::path& path, const RasterImage& img);

// Background pixels become black.
RasterImage ApplyMask(const RasterImage& img, const Mask& mask);

}  // namespace protoscope

#endif  // PROTOSCOPE_ROI_H_
