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

#ifndef RESQ_MODEL_HPP_
#define RESQ_MODEL_HPP_

#include <filesystem>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "resq/dynamic_policy.hpp"
#include "resq/quantizer.hpp"
#include "resq/tensor.hpp"

namespace resq {

enum class Nonlinearity { None, Relu };

/*
 * Quantizer slots of one convolution. Keyframes use the keyframe_* pair,
 * residual frames the residual_* pair; residual activations may instead
 * carry a pool for the dynamic policy. Default-constructed slots are
 * passthrough, i.e. the layer runs in full precision.
 */
struct LayerQuantConfig {
  QuantParams keyframe_weight = QuantParams::passthrough();
  QuantParams keyframe_act = QuantParams::passthrough();
  QuantParams residual_weight = QuantParams::passthrough();
  std::variant<QuantParams, QuantizerPool> residual_act = QuantParams::passthrough();

  bool has_pool() const noexcept { return std::holds_alternative<QuantizerPool>(residual_act); }
  const QuantizerPool &pool() const;
  /// Static residual quantizer; the highest pool entry when a pool is set.
  const QuantParams &static_residual_act() const;

  friend bool operator==(const LayerQuantConfig &, const LayerQuantConfig &) = default;
};

struct Layer {
  Tensor weights;  // (C_out, C_in, kH, kW)
  std::size_t padding = 0;
  Nonlinearity nonlinearity = Nonlinearity::None;
  LayerQuantConfig quant;

  friend bool operator==(const Layer &, const Layer &) = default;
};

struct ModelSpec {
  std::vector<Layer> layers;

  /// Output shape of every layer for an input of `input`; throws on mismatch.
  std::vector<Shape> activation_shapes(const Shape &input) const;
  /// Copy with every quantizer slot reset to passthrough.
  ModelSpec full_precision() const;
  ModelSpec prefix(std::size_t n_layers) const;

  friend bool operator==(const ModelSpec &, const ModelSpec &) = default;
};

/// Keyframes at t mod period == 0.
struct ScheduleConfig {
  std::size_t period = 1;

  bool is_keyframe(std::size_t t) const noexcept { return period == 0 ? t == 0 : t % period == 0; }
  std::size_t distance_to_keyframe(std::size_t t) const noexcept { return period == 0 ? t : t % period; }
};

Tensor apply_nonlinearity(const Tensor &z, Nonlinearity nl);

// Model JSON: {"layers": [{"weights": "<file>.rtf", "padding": p,
// "nonlinearity": "relu"|"none"}]}, weight paths relative to the JSON file.
void save_model(const ModelSpec &model, const std::filesystem::path &json_path);
ModelSpec load_model(const std::filesystem::path &json_path);

// Calibration JSON: {"layers": [{keyframe_weight, keyframe_act,
// residual_weight, residual_act | residual_pool}]} plus free-form metadata.
nlohmann::json quant_config_to_json(const ModelSpec &model);
void apply_quant_config(ModelSpec &model, const nlohmann::json &doc);

}  // namespace resq

#endif  // RESQ_MODEL_HPP_
