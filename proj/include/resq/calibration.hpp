/**
 * Copyright 2026 The resq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RESQ_CALIBRATION_HPP_
#define RESQ_CALIBRATION_HPP_

#include <span>
#include <string>
#include <vector>

#include "resq/model.hpp"
#include "resq/quantizer.hpp"

namespace resq {

using Clip = std::vector<Tensor>;

/*
 * Bit-widths for keyframes and residual frames, written "WxAy|WuAv".
 * A pool is written "WxAy|WuA{a,b,c}"; a bare "WxAy" means frame
 * quantization (residual bits equal keyframe bits).
 */
struct PrecisionConfig {
  int keyframe_weight_bits = 8;
  int keyframe_act_bits = 8;
  int residual_weight_bits = 8;
  std::vector<int> residual_act_bits{8};  // >1 entries form a pool

  bool has_pool() const noexcept { return residual_act_bits.size() > 1; }
  std::string to_string() const;
};

PrecisionConfig parse_precision(const std::string &notation);
/// "0,4,8" -> {0, 4, 8}
std::vector<int> parse_bit_list(const std::string &list);

struct CalibrationConfig {
  std::size_t samples = 64;  // c
  std::size_t grid = 20;     // r
  std::size_t period = 3;    // T used to form residual samples
  Granularity weight_granularity = Granularity::PerTensor;
  // Frame-quantization baselines: calibrate keyframe slots on every frame
  // and mirror them into the residual slots.
  bool frame_only = false;
};

/// Per-channel (or single) weight ranges with r_min forced <= 0 <= r_max.
std::vector<Range> weight_minmax_range(const Tensor &w, Granularity granularity);
QuantParams weight_minmax_params(const Tensor &w, Granularity granularity, int bits);

enum class ActivationSource { Frame, Residual };

/*
 * Layer-`layer` inputs gathered under the current (partially calibrated)
 * model, stacked as (N, C, H, W) with N <= config.samples. Frame batches use
 * keyframe inputs; residual batches use delta = x^t - x^k over the residual
 * frames of each period. Throws InvalidArgument when nothing is collected.
 */
Tensor collect_activations(const ModelSpec &model, std::size_t layer, std::span<const Clip> clips,
                           ActivationSource source, const CalibrationConfig &config);

/// ||X*w - q(X; params)*w_hat||_F summed over the batch.
double range_objective(const Tensor &batch, const Tensor &w, const Tensor &w_hat, std::size_t padding,
                       const QuantParams &params);

/// linspace(min(0, min X), max(0, max X), r).
std::vector<double> search_grid(const Tensor &batch, std::size_t points);

struct LineSearchResult {
  QuantParams params;
  Range range;
  double objective = 0.0;
  std::size_t candidates = 0;  // distinct magnitudes evaluated
};

/*
 * Activation range minimizing range_objective over (r_min, r_max) pairs of
 * the search grid with r_min <= 0 <= r_max. The scale depends only on
 * max(r_max, -r_min), so each distinct magnitude is evaluated once; ties go
 * to the smallest magnitude.
 */
LineSearchResult line_search_activation_range(const Tensor &batch, const Tensor &w, const QuantParams &w_params,
                                              std::size_t padding, int bits, std::size_t grid);

/// Fills every quantizer slot layer by layer, upstream layers already quantized.
ModelSpec calibrate_model(const ModelSpec &model, std::span<const Clip> clips, const PrecisionConfig &precision,
                          const CalibrationConfig &config);

}  // namespace resq

#endif  // RESQ_CALIBRATION_HPP_
