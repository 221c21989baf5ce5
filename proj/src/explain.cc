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

#include "protoscope/explain.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "json.hpp"
#include "protoscope/error.h"

namespace protoscope {
namespace {

// Jet: channel k in {r, g, b} peaks at x = (3 - k) / 4. In integers,
// twice the scaled value is 765 - 2 * |4i - 255 * (3 - k)|.
constexpr std::array<std::array<std::uint8_t, 3>, 256> MakeJet() {
  std::array<std::array<std::uint8_t, 3>, 256> table{};
  for (int i = 0; i < 256; ++i) {
    for (int k = 0; k < 3; ++k) {
      int d = 4 * i - 255 * (3 - k);
      if (d < 0) d = -d;
      const int twice = 765 - 2 * d;
      int v = twice <= 0 ? 0 : (twice + 1) / 2;
      if (v > 255) v = 255;
      table[i][k] = static_cast<std::uint8_t>(v);
    }
  }
  return table;
}

constexpr auto kJet = MakeJet();

int ScaleDown(int v, int from, int to) {
  return static_cast<int>(static_cast<long long>(v) * to / from);
}

int ScaleUp(int v, int from, int to) {
  return static_cast<int>((static_cast<long long>(v) * to + from - 1) / from);
}

}  // namespace

DecisionReport DecisionChain(const PrototypeTree& tree, const FeatureMap& fm,
                             double threshold) {
  const Prediction pred = Predict(tree, fm);
  const HardRoute route = ComputeHardRoute(tree, fm, threshold);
  DecisionReport report;
  report.threshold = threshold;
  for (std::size_t i = 0; i < route.path.size(); ++i) {
    const int node = route.path[i];
    const NodeRouting& r = pred.trace.nodes[node - 1];
    DecisionStep step;
    step.node = node;
    step.similarity = route.similarity[i];
    step.distance = r.distance;
    step.location = r.location;
    step.present = route.went_right[i];
    if (!tree.provenance().empty())
      step.provenance = tree.provenance()[node - 1];
    report.steps.push_back(std::move(step));
  }
  report.leaf = route.leaf;
  report.leaf_distribution = route.distribution;
  report.soft_distribution = pred.distribution;
  return report;
}

ReceptiveField ReceptiveField::ForArch(const BackboneArch& arch) {
  return {arch.TotalStride(), arch.ReceptiveField(), arch.input_size};
}

BoundingBox CellBox(const ReceptiveField& rf, PatchLocation cell) {
  const int top = cell.row * rf.stride - (rf.size - rf.stride) / 2;
  const int left = cell.col * rf.stride - (rf.size - rf.stride) / 2;
  const int y0 = std::clamp(top, 0, rf.input_size);
  const int x0 = std::clamp(left, 0, rf.input_size);
  const int y1 = std::clamp(top + rf.size, 0, rf.input_size);
  const int x1 = std::clamp(left + rf.size, 0, rf.input_size);
  return {y0, x0, std::max(y1 - y0, 0), std::max(x1 - x0, 0)};
}

PrototypeHeatmap ComputePrototypeHeatmap(const PrototypeTree& tree, int node,
                                         const FeatureMap& fm,
                                         const ReceptiveField& rf,
                                         int out_height, int out_width) {
  if (!PrototypeTree::IsInternal(node, tree.depth())) {
    throw Error(ErrorCode::kInvalidArgument,
                "node " + std::to_string(node) + " is not internal");
  }
  if (fm.depth() != tree.feature_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature depth");
  }
  if (rf.stride < 1 || rf.size < 1 || rf.input_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "receptive field");
  }
  const std::span<const double> p = tree.prototype(node);
  PrototypeHeatmap hm;
  hm.node = node;
  hm.grid_height = fm.height();
  hm.grid_width = fm.width();
  hm.grid.resize(static_cast<std::size_t>(fm.height()) * fm.width());
  for (int r = 0; r < fm.height(); ++r) {
    for (int c = 0; c < fm.width(); ++c) {
      const std::span<const float> z = fm.patch(r, c);
      double s = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = static_cast<double>(z[i]) - p[i];
        s += d * d;
      }
      hm.grid[static_cast<std::size_t>(r) * fm.width() + c] =
          Similarity(std::sqrt(s));
    }
  }
  const NearestPatch nearest = FindNearestPatch(fm, p);
  hm.max_location = nearest.location;
  hm.max_similarity = Similarity(nearest.distance);
  hm.out_height = out_height;
  hm.out_width = out_width;
  hm.upsampled = ResizeBilinearPlane(hm.grid, fm.height(), fm.width(),
                                     out_height, out_width);
  const BoundingBox cell = CellBox(rf, nearest.location);
  const int top = ScaleDown(cell.top, rf.input_size, out_height);
  const int left = ScaleDown(cell.left, rf.input_size, out_width);
  const int bottom = std::min(
      out_height, ScaleUp(cell.top + cell.height, rf.input_size, out_height));
  const int right = std::min(
      out_width, ScaleUp(cell.left + cell.width, rf.input_size, out_width));
  hm.bbox = {top, left, std::max(bottom - top, 0), std::max(right - left, 0)};
  return hm;
}

const std::array<std::array<std::uint8_t, 3>, 256>& HeatColormap() {
  return kJet;
}

RasterImage RenderOverlay(const RasterImage& image,
                          const PrototypeHeatmap& heatmap, bool draw_box) {
  if (image.height() != heatmap.out_height ||
      image.width() != heatmap.out_width) {
    throw Error(ErrorCode::kDimensionMismatch, "overlay size");
  }
  RasterImage out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double h = std::clamp(
          heatmap.upsampled[static_cast<std::size_t>(y) * image.width() + x],
          0.0, 1.0);
      const double alpha = 0.5 * h;
      const auto& color =
          kJet[static_cast<std::size_t>(std::lround(h * 255.0))];
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = static_cast<float>((1.0 - alpha) * image.at(y, x, c) +
                                             alpha * (color[c] / 255.0));
      }
    }
  }
  if (!draw_box || heatmap.bbox.height <= 0 || heatmap.bbox.width <= 0) {
    return out;
  }
  const BoundingBox& b = heatmap.bbox;
  constexpr int kThickness = 2;
  for (int y = b.top; y < b.top + b.height; ++y) {
    for (int x = b.left; x < b.left + b.width; ++x) {
      const bool edge =
          y < b.top + kThickness || y >= b.top + b.height - kThickness ||
          x < b.left + kThickness || x >= b.left + b.width - kThickness;
      if (!edge) continue;
      out.at(y, x, 0) = 1.0f;
      out.at(y, x, 1) = 1.0f;
      out.at(y, x, 2) = 0.0f;
    }
  }
  return out;
}

std::string DecisionReportJson(const DecisionReport& report) {
  using nlohmann::json;
  json steps = json::array();
  for (const DecisionStep& s : report.steps) {
    json step = {{"node", s.node},
                 {"similarity", s.similarity},
                 {"distance", s.distance},
                 {"verdict", s.present ? "Present" : "Absent"},
                 {"patch", {{"row", s.location.row}, {"col", s.location.col}}}};
    if (s.provenance) {
      step["provenance"] = {{"source_id", s.provenance->source_id},
                            {"map_index", s.provenance->map_index},
                            {"row", s.provenance->location.row},
                            {"col", s.provenance->location.col}};
    } else {
      step["provenance"] = nullptr;
    }
    steps.push_back(std::move(step));
  }
  json j = {{"threshold", report.threshold},
            {"steps", steps},
            {"leaf", report.leaf},
            {"leaf_distribution", report.leaf_distribution},
            {"soft_distribution", report.soft_distribution}};
  return j.dump(2) + "\n";
}

}  // namespace protoscope
