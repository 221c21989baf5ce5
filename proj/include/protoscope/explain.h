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

#ifndef PROTOSCOPE_EXPLAIN_H_
#define PROTOSCOPE_EXPLAIN_H_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "protoscope/prototree.h"
#include "protoscope/raster.h"
#include "protoscope/roi.h"

namespace protoscope {

struct DecisionStep {
  int node = 0;
  double similarity = 0.0;
  double distance = 0.0;
  PatchLocation location;
  bool present = false;  // similarity >= threshold; Present goes right
  std::optional<Provenance> provenance;
};

struct DecisionReport {
  double threshold = 0.5;
  std::vector<DecisionStep> steps;  // root first, length == depth
  int leaf = 0;
  std::vector<double> leaf_distribution;
  std::vector<double> soft_distribution;
};

DecisionReport DecisionChain(const PrototypeTree& tree, const FeatureMap& fm,
                             double threshold = 0.5);

// Grid cell to input-pixel mapping for a backbone.
struct ReceptiveField {
  int stride = 1;
  int size = 1;
  int input_size = 1;  // side of the square network input

  static ReceptiveField ForArch(const BackboneArch& arch);
};

struct PrototypeHeatmap {
  int node = 0;
  int grid_height = 0;
  int grid_width = 0;
  std::vector<double> grid;  // exp(-distance) per feature location
  int out_height = 0;
  int out_width = 0;
  std::vector<double> upsampled;  // bilinear, out_height x out_width
  PatchLocation max_location;
  double max_similarity = 0.0;
  BoundingBox bbox;  // in output-image pixels
};

// Receptive-field box of a grid cell in network-input pixels:
// top = row * stride - (size - stride) / 2, height = size, clipped.
BoundingBox CellBox(const ReceptiveField& rf, PatchLocation cell);

// Heatmap of one internal node's prototype over fm, upsampled to
// out_height x out_width; the box is the argmax cell's receptive field scaled
// from network-input to output pixels. Throws kInvalidArgument for a
// non-internal node.
PrototypeHeatmap ComputePrototypeHeatmap(const PrototypeTree& tree, int node,
                                         const FeatureMap& fm,
                                         const ReceptiveField& rf,
                                         int out_height, int out_width);

// 256-entry jet-style colormap.
const std::array<std::array<std::uint8_t, 3>, 256>& HeatColormap();

// Per-pixel blend out = (1 - a) * img + a * color(h) with a = 0.5 * h, then a
// 2 px yellow box outline. Throws kDimensionMismatch on size mismatch.
RasterImage RenderOverlay(const RasterImage& image,
                          const PrototypeHeatmap& heatmap,
                          bool draw_box = true);

std::string DecisionReportJson(const DecisionReport& report);

}  // namespace protoscope

#endif  // PROTOSCOPE_EXPLAIN_H_
