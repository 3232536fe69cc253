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

#ifndef RESQ_ENGINE_HPP_
#define RESQ_ENGINE_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resq/bops.hpp"
#include "resq/dynamic_policy.hpp"
#include "resq/model.hpp"

namespace resq {

enum class ParamSet { Keyframe, Residual };
enum class ResidualMode { Pairwise, Recurrent };
enum class RunMode { Frame, ResqPairwise, ResqRecurrent, ResqDynamic };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string &s);

/*
 * Per-layer references of one inference session. reference_input holds the
 * keyframe's float layer input and reference_output the keyframe's
 * fixed-point layer output (pre-nonlinearity). Recurrent sessions overwrite
 * both after every residual frame; pairwise sessions only at keyframes.
 */
struct ResidualState {
  ResidualMode mode = ResidualMode::Pairwise;
  std::vector<Tensor> reference_input;
  std::vector<Tensor> reference_output;

  bool initialized() const noexcept { return !reference_input.empty(); }
  void reset() {
    reference_input.clear();
    reference_output.clear();
  }
};

/// Everything one frame's forward pass produced, layer by layer.
struct ForwardResult {
  Tensor output;
  std::vector<Tensor> layer_inputs;   // float input seen by each layer
  std::vector<Tensor> layer_outputs;  // post-nonlinearity output of each layer
  std::vector<Tensor> residuals;      // per-layer delta (residual frames only)
  std::vector<IndexMap> index_maps;   // per-layer policy decision (dynamic only)
  std::vector<LayerBops> costs;       // frame index left at 0
};

/// Independent per-frame inference with either parameter set.
ForwardResult frame_forward(const ModelSpec &model, const Tensor &x, ParamSet which = ParamSet::Keyframe);

/// Keyframe pass; (re)initializes every layer's references in `state`.
ForwardResult keyframe_forward(const ModelSpec &model, const Tensor &x, ResidualState &state);

/*
 * Residual pass: per layer, delta = input - reference_input,
 * z = conv(q(delta; residual_act), q(w; residual_weight)) + reference_output.
 * Throws SequencingError when no keyframe has been seen.
 */
ForwardResult residual_forward(const ModelSpec &model, const Tensor &x, ResidualState &state);

/// Residual pass with the activation quantizer chosen per pixel from each layer's pool.
ForwardResult dynamic_residual_forward(const ModelSpec &model, const Tensor &x, ResidualState &state,
                                       const PolicyConfig &policy);

struct SequenceResult {
  std::vector<ForwardResult> frames;
  BopReport report;

  std::vector<Tensor> outputs() const;
};

SequenceResult run_sequence(const ModelSpec &model, std::span<const Tensor> clip, const ScheduleConfig &schedule,
                            RunMode mode, const PolicyConfig &policy = {});

/*
 * Stateful wrapper over the frame functions: feeds frames one at a time and
 * dispatches by schedule. Owns its ResidualState; the model must outlive it.
 */
class Session {
 public:
  Session(const ModelSpec &model, ScheduleConfig schedule, RunMode mode, PolicyConfig policy = {});

  ForwardResult push(const Tensor &frame);
  std::size_t frames_seen() const noexcept { return next_frame_; }
  const ResidualState &state() const noexcept { return state_; }

 private:
  const ModelSpec *model_;
  ScheduleConfig schedule_;
  RunMode mode_;
  PolicyConfig policy_;
  ResidualState state_;
  std::size_t next_frame_ = 0;
};

}  // namespace resq

#endif  // RESQ_ENGINE_HPP_
