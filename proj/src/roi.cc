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

#include "protoscope/roi.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "protoscope/error.h"

namespace protoscope {
namespace {

void CheckSameSize(const RasterImage& img, const Mask& mask) {
  if (img.height() != mask.height() || img.width() != mask.width()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "mask " + std::to_string(mask.height()) + "x" +
                    std::to_string(mask.width()) + " vs image " +
                    std::to_string(img.height()) + "x" +
                    std::to_string(img.width()));
  }
}

Mask Morph(const Mask& mask, int kernel, bool erode) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "kernel must be odd and >= 1");
  }
  const int r = kernel / 2;
  const int h = mask.height();
  const int w = mask.width();
  Mask out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool v = erode;
      for (int dy = -r; dy <= r && v == erode; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          if (mask.at(yy, xx) != erode) {
            v = !erode;
            break;
          }
        }
      }
      out.set(y, x, v);
    }
  }
  return out;
}

}  // namespace

double BetweenClassVariance(const Histogram256& histogram, int threshold) {
  double total = 0.0;
  double weighted = 0.0;
  for (int i = 0; i < 256; ++i) {
    total += static_cast<double>(histogram[i]);
    weighted += static_cast<double>(histogram[i]) * i;
  }
  double n0 = 0.0;
  double s0 = 0.0;
  for (int i = 0; i <= threshold; ++i) {
    n0 += static_cast<double>(histogram[i]);
    s0 += static_cast<double>(histogram[i]) * i;
  }
  const double n1 = total - n0;
  if (n0 == 0.0 || n1 == 0.0) return 0.0;
  const double mu0 = s0 / n0;
  const double mu1 = (weighted - s0) / n1;
  const double w0 = n0 / total;
  const double w1 = n1 / total;
  return w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
}

int OtsuThreshold(const Histogram256& histogram) {
  int best = -1;
  double best_var = 0.0;
  for (int t = 0; t < 256; ++t) {
    const double var = BetweenClassVariance(histogram, t);
    if (var > best_var) {
      best_var = var;
      best = t;
    }
  }
  return best;
}

BoundingBox TightBoundingBox(const Mask& mask) {
  int top = mask.height(), left = mask.width(), bottom = -1, right = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(y, x)) continue;
      top = std::min(top, y);
      bottom = std::max(bottom, y);
      left = std::min(left, x);
      right = std::max(right, x);
    }
  }
  if (bottom < 0) throw Error(ErrorCode::kNoForeground, "empty mask");
  return {top, left, bottom - top + 1, right - left + 1};
}

Mask Erode(const Mask& mask, int kernel) { return Morph(mask, kernel, true); }
Mask Dilate(const Mask& mask, int kernel) { return Morph(mask, kernel, false); }

Mask LargestComponent(const Mask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  std::vector<int> label(static_cast<std::size_t>(h) * w, 0);
  int best_label = 0;
  std::size_t best_size = 0;
  int next = 0;
  std::deque<int> queue;
  for (int start = 0; start < h * w; ++start) {
    if (!mask.data()[start] || label[start] != 0) continue;
    ++next;
    std::size_t size = 0;
    label[start] = next;
    queue.push_back(start);
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      ++size;
      const int py = p / w, px = p % w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int y = py + dy, x = px + dx;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          const int q = y * w + x;
          if (mask.data()[q] && label[q] == 0) {
            label[q] = next;
            queue.push_back(q);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
  }
  Mask out(h, w);
  for (int p = 0; p < h * w; ++p) {
    if (best_label != 0 && label[p] == best_label) out.set(p / w, p % w, true);
  }
  return out;
}

Mask FillHoles(const Mask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  std::vector<std::uint8_t> outside(static_cast<std::size_t>(h) * w, 0);
  std::deque<int> queue;
  auto seed = [&](int y, int x) {
    const int p = y * w + x;
    if (!mask.at(y, x) && !outside[p]) {
      outside[p] = 1;
      queue.push_back(p);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(0, x);
    seed(h - 1, x);
  }
  for (int y = 0; y < h; ++y) {
    seed(y, 0);
    seed(y, w - 1);
  }
  static constexpr int kDy[4] = {-1, 1, 0, 0};
  static constexpr int kDx[4] = {0, 0, -1, 1};
  while (!queue.empty()) {
    const int p = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int y = p / w + kDy[k], x = p % w + kDx[k];
      if (y < 0 || y >= h || x < 0 || x >= w) continue;
      seed(y, x);
    }
  }
  Mask out(h, w);
  for (int p = 0; p < h * w; ++p) out.set(p / w, p % w, !outside[p]);
  return out;
}

SegmentationResult SegmentForeground(const RasterImage& img,
                                     const SegmentParams& params) {
  const int h = img.height();
  const int w = img.width();
  if (h < 8 || w < 8) {
    throw Error(ErrorCode::kInvalidArgument, "image must be at least 8x8");
  }
  const int bw = params.border_width;
  if (bw < 1 || 2 * bw >= std::min(h, w)) {
    throw Error(ErrorCode::kInvalidArgument, "border width");
  }

  // Per-channel lower median over the border frame.
  std::array<double, 3> background{};
  for (int c = 0; c < 3; ++c) {
    std::vector<float> frame;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (y < bw || y >= h - bw || x < bw || x >= w - bw) {
          frame.push_back(img.at(y, x, c));
        }
      }
    }
    const auto mid =
        frame.begin() + static_cast<std::ptrdiff_t>((frame.size() - 1) / 2);
    std::nth_element(frame.begin(), mid, frame.end());
    background[c] = *mid;
  }

  std::vector<double> dist(static_cast<std::size_t>(h) * w);
  double max_dist = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = img.at(y, x, c) - background[c];
        s += d * d;
      }
      const double d = std::sqrt(s);
      dist[static_cast<std::size_t>(y) * w + x] = d;
      max_dist = std::max(max_dist, d);
    }
  }
  if (max_dist <= 0.0) {
    throw Error(ErrorCode::kNoForeground, "no contrast against background");
  }

  // bin = min(255, floor(256 * d / max_d)).
  std::vector<int> bins(dist.size());
  Histogram256 histogram{};
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const int b = std::min(255, static_cast<int>(256.0 * dist[i] / max_dist));
    bins[i] = b;
    ++histogram[b];
  }
  const int threshold = OtsuThreshold(histogram);
  if (threshold < 0) {
    throw Error(ErrorCode::kNoForeground, "histogram is not separable");
  }
  Mask mask(h, w);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i] > threshold) {
      mask.set(static_cast<int>(i) / w, static_cast<int>(i) % w, true);
    }
  }

  const int k = params.morph_kernel;
  mask = Dilate(Erode(mask, k), k);  // open
  mask = Erode(Dilate(mask, k), k);  // close
  mask = FillHoles(LargestComponent(mask));

  const std::size_t count = mask.CountTrue();
  if (count == 0) {
    throw Error(ErrorCode::kNoForeground, "mask empty after morphology");
  }
  const double fraction =
      static_cast<double>(count) / (static_cast<double>(h) * w);
  if (fraction > params.max_foreground_fraction) {
    throw Error(ErrorCode::kNoForeground,
                "foreground fraction " + std::to_string(fraction));
  }
  SegmentationResult result;
  result.bbox = TightBoundingBox(mask);
  result.mask = std::move(mask);
  result.foreground_fraction = fraction;
  return result;
}

Mask LoadMask(const std::filesystem::path& path, const RasterImage& img) {
  const DecodedRaster raw = DecodeRasterFile(path);
  if (raw.channels != 1) {
    throw Error(ErrorCode::kUnsupportedFormat,
                path.string() + ": multi-channel mask");
  }
  if (raw.height != img.height() || raw.width != img.width()) {
    throw Error(ErrorCode::kDimensionMismatch,
                path.string() + ": mask " + std::to_string(raw.height) + "x" +
                    std::to_string(raw.width));
  }
  Mask mask(raw.height, raw.width);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      mask.set(y, x,
               raw.bytes[static_cast<std::size_t>(y) * raw.width + x] > 127);
    }
  }
  return mask;
}

RasterImage ApplyMask(const RasterImage& img, const Mask& mask) {
  CheckSameSize(img, mask);
  RasterImage out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, c);
    }
  }
  return out;
}

}  // namespace protoscope
