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

#include "protoscope/augment.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "protoscope/error.h"

namespace protoscope {
namespace {

void CheckRange(const Range& r, double min_lo, const char* what) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi ||
      r.lo < min_lo) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string("invalid ") + what + " range [" +
                    std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]");
  }
}

void CheckProbability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "probability " + std::to_string(p) + " outside [0, 1]");
  }
}

struct Rect {
  int top, left, height, width;
};

// Draws a rectangle for random erasing, or returns false.
bool DrawEraseRect(int h, int w, RngStream& rng, Range area, Range aspect,
                   int attempts, Rect* rect) {
  const double total = static_cast<double>(h) * w;
  for (int i = 0; i < attempts; ++i) {
    const double frac = rng.Uniform(area.lo, area.hi);
    const double ratio = rng.Uniform(aspect.lo, aspect.hi);
    const double target = frac * total;
    const long eh = std::lround(std::sqrt(target * ratio));
    const long ew = std::lround(std::sqrt(target / ratio));
    if (eh < 1 || ew < 1 || eh >= h || ew >= w) continue;
    const double realized = static_cast<double>(eh * ew) / total;
    if (realized < area.lo || realized > area.hi) continue;
    const auto top = static_cast<int>(rng.NextBelow(h - eh + 1));
    const auto left = static_cast<int>(rng.NextBelow(w - ew + 1));
    *rect = {top, left, static_cast<int>(eh), static_cast<int>(ew)};
    return true;
  }
  return false;
}

void CheckEraseArgs(double p, Range area, Range aspect) {
  CheckProbability(p);
  CheckRange(area, 0.0, "erase area");
  if (area.hi > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "erase area above 1");
  }
  CheckRange(aspect, 1e-12, "erase aspect");
}

}  // namespace

float NormalizedTensor::BlackValue(int c) const {
  return static_cast<float>((0.0 - norm.mean[c]) / norm.std[c]);
}

RasterImage NormalizedTensor::Denormalize() const {
  RasterImage img(height, width);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    const double v = data[i] * norm.std[c] + norm.mean[c];
    img.data()[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return img;
}

NormalizedTensor BaseTransform(const RasterImage& img, int target,
                               const Normalization& norm) {
  if (target < 1) {
    throw Error(ErrorCode::kInvalidArgument, "target size must be >= 1");
  }
  for (int c = 0; c < 3; ++c) {
    if (!(norm.std[c] > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "std must be > 0");
    }
  }
  int new_h = target;
  int new_w = target;
  if (img.height() >= img.width()) {
    new_w = std::max(1L, std::lround(static_cast<double>(img.width()) * target /
                                     img.height()));
  } else {
    new_h = std::max(1L, std::lround(static_cast<double>(img.height()) *
                                     target / img.width()));
  }
  const RasterImage resized = (new_h == img.height() && new_w == img.width())
                                  ? img
                                  : ResizeBilinear(img, new_h, new_w);
  const int pad_top = (target - new_h) / 2;
  const int pad_left = (target - new_w) / 2;

  NormalizedTensor t;
  t.height = target;
  t.width = target;
  t.norm = norm;
  const std::size_t pixels = static_cast<std::size_t>(target) * target;
  t.data.resize(pixels * 3);
  t.pad_flag.assign(pixels, 1);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < 3; ++c) t.data[3 * p + c] = t.BlackValue(c);
  }
  for (int y = 0; y < new_h; ++y) {
    for (int x = 0; x < new_w; ++x) {
      const std::size_t p =
          static_cast<std::size_t>(y + pad_top) * target + (x + pad_left);
      t.pad_flag[p] = 0;
      for (int c = 0; c < 3; ++c) {
        t.data[3 * p + c] = static_cast<float>(
            (resized.at(y, x, c) - norm.mean[c]) / norm.std[c]);
      }
    }
  }
  return t;
}

RasterImage RandomRotation(const RasterImage& img, RngStream& rng,
                           Range degrees, AugmentTrace* trace) {
  CheckRange(degrees, -360.0, "rotation");
  const double angle = rng.Uniform(degrees.lo, degrees.hi);
  if (trace) trace->rotation_degrees = angle;
  return Rotate(img, angle);
}

RasterImage RandomHorizontalFlip(const RasterImage& img, RngStream& rng,
                                 double p, AugmentTrace* trace) {
  CheckProbability(p);
  const bool flip = rng.NextUnit() < p;
  if (trace) trace->flipped = flip;
  return flip ? FlipHorizontal(img) : img;
}

RasterImage RandomColorJitter(const RasterImage& img, RngStream& rng,
                              Range brightness, Range contrast,
                              Range saturation, AugmentTrace* trace) {
  CheckRange(brightness, 1e-12, "brightness");
  CheckRange(contrast, 1e-12, "contrast");
  CheckRange(saturation, 0.0, "saturation");
  const double b = rng.Uniform(brightness.lo, brightness.hi);
  const double c = rng.Uniform(contrast.lo, contrast.hi);
  const double s = rng.Uniform(saturation.lo, saturation.hi);
  if (trace) trace->color_factors = std::array<double, 3>{b, c, s};
  return AdjustColor(img, b, c, s);
}

RasterImage RandomCrop(const RasterImage& img, RngStream& rng, Range scale,
                       Range aspect, int attempts, AugmentTrace* trace) {
  CheckRange(scale, 1e-12, "crop scale");
  if (scale.hi > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "crop scale above 1");
  }
  CheckRange(aspect, 1e-12, "crop aspect");
  const int h = img.height();
  const int w = img.width();
  const double total = static_cast<double>(h) * w;
  for (int i = 0; i < attempts; ++i) {
    const double frac = rng.Uniform(scale.lo, scale.hi);
    const double ratio = rng.Uniform(aspect.lo, aspect.hi);
    const double area = frac * total;
    const long cw = std::lround(std::sqrt(area * ratio));
    const long ch = std::lround(std::sqrt(area / ratio));
    if (cw < 1 || ch < 1 || cw > w || ch > h) continue;
    const double realized = static_cast<double>(cw * ch) / total;
    if (realized < scale.lo || realized > scale.hi) continue;
    const auto top = static_cast<int>(rng.NextBelow(h - ch + 1));
    const auto left = static_cast<int>(rng.NextBelow(w - cw + 1));
    if (trace) {
      trace->crop =
          BoundingBox{top, left, static_cast<int>(ch), static_cast<int>(cw)};
    }
    return Crop(img, top, left, static_cast<int>(ch), static_cast<int>(cw));
  }
  if (trace) trace->crop = BoundingBox{0, 0, h, w};
  return img;
}

NormalizedTensor RandomErasing(const NormalizedTensor& tensor, RngStream& rng,
                               double p, Range area, Range aspect, int attempts,
                               AugmentTrace* trace) {
  CheckEraseArgs(p, area, aspect);
  if (!(rng.NextUnit() < p)) return tensor;
  Rect r{};
  if (!DrawEraseRect(tensor.height, tensor.width, rng, area, aspect, attempts,
                     &r)) {
    return tensor;
  }
  NormalizedTensor out = tensor;
  for (int y = r.top; y < r.top + r.height; ++y) {
    for (int x = r.left; x < r.left + r.width; ++x) {
      const std::size_t p3 = (static_cast<std::size_t>(y) * out.width + x) * 3;
      for (int c = 0; c < 3; ++c) out.data[p3 + c] = out.BlackValue(c);
    }
  }
  if (trace) {
    trace->erased = BoundingBox{r.top, r.left, r.height, r.width};
    trace->erased_fraction = static_cast<double>(r.height) * r.width /
                             (static_cast<double>(out.height) * out.width);
  }
  return out;
}

RasterImage RandomErasing(const RasterImage& img, RngStream& rng, double p,
                          Range area, Range aspect, int attempts,
                          AugmentTrace* trace) {
  CheckEraseArgs(p, area, aspect);
  if (!(rng.NextUnit() < p)) return img;
  Rect r{};
  if (!DrawEraseRect(img.height(), img.width(), rng, area, aspect, attempts,
                     &r)) {
    return img;
  }
  RasterImage out = img;
  for (int y = r.top; y < r.top + r.height; ++y) {
    for (int x = r.left; x < r.left + r.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = 0.0f;
    }
  }
  if (trace) {
    trace->erased = BoundingBox{r.top, r.left, r.height, r.width};
    trace->erased_fraction = static_cast<double>(r.height) * r.width /
                             (static_cast<double>(img.height()) * img.width());
  }
  return out;
}

AugmentPreset PresetFromId(int id) {
  AugmentPreset p;
  p.id = id;
  switch (id) {
    case 0:
      break;
    case 1:
      p.rotation = p.hflip = true;
      break;
    case 2:
      p.color_jitter = true;
      break;
    case 3:
      p.crop = true;
      break;
    case 4:
      p.erasing = true;
      break;
    case 5:
      p.rotation = p.hflip = p.crop = p.erasing = true;
      break;
    default:
      throw Error(ErrorCode::kInvalidArgument,
                  "unknown preset id " + std::to_string(id));
  }
  return p;
}

AugmentPreset PresetFromOps(const std::vector<std::string>& ops) {
  AugmentPreset p;
  p.id = -1;
  for (const std::string& op : ops) {
    if (op == "base") continue;
    if (op == "rotation") {
      p.rotation = true;
    } else if (op == "hflip") {
      p.hflip = true;
    } else if (op == "color_jitter") {
      p.color_jitter = true;
    } else if (op == "random_crop") {
      p.crop = true;
    } else if (op == "random_erasing") {
      p.erasing = true;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown augmentation " + op);
    }
  }
  // A custom list that matches a numbered preset takes its id.
  for (int id = 0; id <= 5; ++id) {
    const AugmentPreset known = PresetFromId(id);
    if (known.rotation == p.rotation && known.hflip == p.hflip &&
        known.color_jitter == p.color_jitter && known.crop == p.crop &&
        known.erasing == p.erasing) {
      return known;
    }
  }
  return p;
}

std::vector<std::string> PresetOps(const AugmentPreset& preset) {
  std::vector<std::string> ops;
  if (preset.rotation) ops.push_back("rotation");
  if (preset.hflip) ops.push_back("hflip");
  if (preset.color_jitter) ops.push_back("color_jitter");
  if (preset.crop) ops.push_back("random_crop");
  ops.push_back("base");
  if (preset.erasing) ops.push_back("random_erasing");
  return ops;
}

NormalizedTensor ApplyPreset(const RasterImage& img,
                             const AugmentPreset& preset, RngStream& rng,
                             const AugmentParams& params, AugmentTrace* trace) {
  RasterImage work = img;
  if (preset.rotation) {
    work = RandomRotation(work, rng, params.rotation_degrees, trace);
  }
  if (preset.hflip) {
    work = RandomHorizontalFlip(work, rng, params.hflip_probability, trace);
  }
  if (preset.color_jitter) {
    work = RandomColorJitter(work, rng, params.brightness, params.contrast,
                             params.saturation, trace);
  }
  if (preset.crop) {
    work = RandomCrop(work, rng, params.crop_scale, params.crop_aspect,
                      params.crop_attempts, trace);
  }
  NormalizedTensor tensor =
      BaseTransform(work, params.target_size, params.norm);
  if (preset.erasing) {
    tensor =
        RandomErasing(tensor, rng, params.erase_probability, params.erase_area,
                      params.erase_aspect, params.erase_attempts, trace);
  }
  return tensor;
}

}  // namespace protoscope
