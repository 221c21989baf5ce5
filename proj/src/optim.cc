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

#include "protoscope/optim.h"

#include <cmath>
#include <numbers>
#include <string>

#include "protoscope/error.h"

namespace protoscope {
namespace {

// Cosine interpolation from start (pct = 0) to end (pct = 1).
double CosineAnneal(double start, double end, double pct) {
  return end + (start - end) / 2.0 * (1.0 + std::cos(std::numbers::pi * pct));
}

}  // namespace

void AdamStep(std::span<double> params, std::span<const double> grads,
              AdamState& state, double lr, const AdamConfig& config) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "adam: " + std::to_string(params.size()) + " params, " +
                    std::to_string(grads.size()) + " grads, " +
                    std::to_string(state.m.size()) + " moments");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

double OneCycleLr(std::int64_t step, std::int64_t total_steps,
                  const OneCycleConfig& config) {
  if (total_steps < 1 || step < 0 || step >= total_steps) {
    throw Error(ErrorCode::kInvalidArgument,
                "step " + std::to_string(step) + " outside [0, " +
                    std::to_string(total_steps) + ")");
  }
  const double initial = config.max_lr / config.div_factor;
  const double final_lr = initial / config.final_div_factor;
  const double peak_step = config.pct_start * static_cast<double>(total_steps);
  const double last_step = static_cast<double>(total_steps - 1);
  const double s = static_cast<double>(step);
  if (s <= peak_step) {
    if (peak_step <= 0.0) return config.max_lr;
    return CosineAnneal(initial, config.max_lr, s / peak_step);
  }
  if (last_step <= peak_step) return config.max_lr;
  return CosineAnneal(config.max_lr, final_lr,
                      (s - peak_step) / (last_step - peak_step));
}

}  // namespace protoscope
