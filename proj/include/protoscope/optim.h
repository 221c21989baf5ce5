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

#ifndef PROTOSCOPE_OPTIM_H_
#define PROTOSCOPE_OPTIM_H_

#include <cstdint>
#include <span>
#include <vector>

namespace protoscope {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update in place. Throws kDimensionMismatch when the
// spans and state disagree in size.
void AdamStep(std::span<double> params, std::span<const double> grads,
              AdamState& state, double lr, const AdamConfig& config = {});

struct OneCycleConfig {
  double max_lr = 0.001;
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
};

// Cosine warm-up from max_lr / div to max_lr over the first
// pct_start * total_steps steps, then cosine annealing to
// (max_lr / div) / final_div at step total_steps - 1.
// Throws kInvalidArgument unless 0 <= step < total_steps.
double OneCycleLr(std::int64_t step, std::int64_t total_steps,
                  const OneCycleConfig& config = {});

}  // namespace protoscope

#endif  // PROTOSCOPE_OPTIM_H_
