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

#ifndef PROTOSCOPE_TESTS_SUPPORT_SYNTHETIC_H_
#define PROTOSCOPE_TESTS_SUPPORT_SYNTHETIC_H_

#include <cstdint>
#include <vector>

#include "protoscope/augment.h"
#include "protoscope/features.h"
#include "protoscope/raster.h"

namespace protoscope::testing {

struct SyntheticSample {
  RasterImage image;
  int label = 0;  // 1 when the bright patch is present
};

// Textured background (gray base, sinusoidal ripple, per-pixel noise); label 1
// images carry a white 8x8 patch at a random position. Labels alternate so
// every prefix is balanced.
std::vector<SyntheticSample> MakePatchDataset(int count, int size,
                                              std::uint64_t seed);

// Seeded backbone for the patch task: one 3x3 stride-2 block followed by two
// 1x1 blocks (stride 2, then 1). Receptive field 3 px at stride 4, so at least
// one cell lies wholly inside any 8x8 patch.
BackboneArch PatchTaskArch(int input_size);

// Maps white to 0, so patch-interior cells extract to the zero vector.
Normalization PatchTaskNormalization();

// Light background with a dark elliptical body; `marked` adds a white square
// on the body. Small per-pixel noise from the seed.
RasterImage MakeFishImage(int height, int width, std::uint64_t seed,
                          bool marked);

}  // namespace protoscope::testing

#endif  // PROTOSCOPE_TESTS_SUPPORT_SYNTHETIC_H_
