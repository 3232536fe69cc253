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

#include "resq/engine.hpp"

#include "resq/errors.hpp"

namespace resq {

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Frame:
      return "frame";
    case RunMode::ResqPairwise:
      return "resq-pairwise";
    case RunMode::ResqRecurrent:
      return "resq-recurrent";
    case RunMode::ResqDynamic:
      return "resq-dynamic";
  }
  return "unknown";
}

RunMode parse_run_mode(const std::string &s) {
  if (s == "frame") return RunMode::Frame;
  if (s == "resq-pairwise" || s == "resq") return RunMode::ResqPairwise;
  if (s == "resq-recurrent") return RunMode::ResqRecurrent;
  if (s == "resq-dynamic") return RunMode::ResqDynamic;
  throw ParseError("unknown mode '" + s + "'");
}

namespace {

LayerBops uniform_cost(const Layer &layer, const Tensor &input, const QuantParams &w, const QuantParams &a) {
  const ConvShape shape = conv_shape(layer.weights, input.extent(1), input.extent(2), layer.padding);
  LayerBops c;
  c.macs = shape.macs();
  c.weight_bits = w.effective_bits();
  c.act_bits = a.effective_bits();
  c.conv_bops = conv_bops(shape, c.weight_bits, c.act_bits);
  return c;
}

void check_input(const ModelSpec &model, const Tensor &x) {
  if (model.layers.empty()) throw InvalidArgument("model has no layers");
  model.activation_shapes(x.shape());
}

void check_state(const ModelSpec &model, const ResidualState &state, const Tensor &x) {
  if (!state.initialized()) throw SequencingError("residual frame before any keyframe");
  if (state.reference_input.size() != model.layers.size()) throw SequencingError("state belongs to a different model");
  require_same_shape(state.reference_input.front(), x, "residual frame");
}

// Shared residual-layer step: quantized delta in, reconstructed output out.
Tensor reconstruct(const Layer &layer, const Tensor &delta_q, const Tensor &w_hat, const Tensor &reference_output,
                   bool skip_conv) {
  if (skip_conv) return reference_output;
  return add(conv2d(delta_q, w_hat, layer.padding), reference_output);
}

}  // namespace

ForwardResult frame_forward(const ModelSpec &model, const Tensor &x, ParamSet which) {
  check_input(model, x);
  ForwardResult r;
  Tensor cur = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer &layer = model.layers[l];
    const QuantParams &pw = which == ParamSet::Keyframe ? layer.quant.keyframe_weight : layer.quant.residual_weight;
    const QuantParams &pa = which == ParamSet::Keyframe ? layer.quant.keyframe_act : layer.quant.static_residual_act();
    LayerBops cost = uniform_cost(layer, cur, pw, pa);
    cost.layer = l;
    r.costs.push_back(cost);
    r.layer_inputs.push_back(cur);
    const Tensor z = conv2d(fake_quantize(cur, pa), fake_quantize(layer.weights, pw), layer.padding);
    cur = apply_nonlinearity(z, layer.nonlinearity);
    r.layer_outputs.push_back(cur);
  }
  r.output = cur;
  return r;
}

ForwardResult keyframe_forward(const ModelSpec &model, const Tensor &x, ResidualState &state) {
  check_input(model, x);
  state.reset();
  ForwardResult r;
  Tensor cur = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer &layer = model.layers[l];
    const auto &q = layer.quant;
    LayerBops cost = uniform_cost(layer, cur, q.keyframe_weight, q.keyframe_act);
    cost.layer = l;
    cost.is_keyframe = true;
    r.costs.push_back(cost);
    r.layer_inputs.push_back(cur);
    Tensor z = conv2d(fake_quantize(cur, q.keyframe_act), fake_quantize(layer.weights, q.keyframe_weight), layer.padding);
    state.reference_input.push_back(cur);
    cur = apply_nonlinearity(z, layer.nonlinearity);
    state.reference_output.push_back(std::move(z));
    r.layer_outputs.push_back(cur);
  }
  r.output = cur;
  return r;
}

ForwardResult residual_forward(const ModelSpec &model, const Tensor &x, ResidualState &state) {
  check_input(model, x);
  check_state(model, state, x);
  ForwardResult r;
  Tensor cur = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer &layer = model.layers[l];
    const QuantParams &pa = layer.quant.static_residual_act();
    const QuantParams &pw = layer.quant.residual_weight;
    LayerBops cost = uniform_cost(layer, cur, pw, pa);
    cost.layer = l;
    r.costs.push_back(cost);
    r.layer_inputs.push_back(cur);

    Tensor delta = sub(cur, state.reference_input[l]);
    const Tensor w_hat = fake_quantize(layer.weights, pw);
    Tensor z = reconstruct(layer, fake_quantize(delta, pa), w_hat, state.reference_output[l], pa.is_zero_bit());
    r.residuals.push_back(std::move(delta));
    if (state.mode == ResidualMode::Recurrent) {
      state.reference_input[l] = cur;
      state.reference_output[l] = z;
    }
    cur = apply_nonlinearity(z, layer.nonlinearity);
    r.layer_outputs.push_back(cur);
  }
  r.output = cur;
  return r;
}

ForwardResult dynamic_residual_forward(const ModelSpec &model, const Tensor &x, ResidualState &state,
                                       const PolicyConfig &policy) {
  check_input(model, x);
  check_state(model, state, x);
  ForwardResult r;
  Tensor cur = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer &layer = model.layers[l];
    const QuantizerPool &pool = layer.quant.pool();
    const QuantParams &pw = layer.quant.residual_weight;
    const ConvShape shape = conv_shape(layer.weights, cur.extent(1), cur.extent(2), layer.padding);
    if (shape.out_h != shape.in_h || shape.out_w != shape.in_w) {
      throw DimensionError("dynamic policy requires same-padding layers (layer " + std::to_string(l) + ")");
    }
    r.layer_inputs.push_back(cur);

    Tensor delta = sub(cur, state.reference_input[l]);
    const Tensor w_hat = fake_quantize(layer.weights, pw);
    std::vector<Tensor> maps;
    maps.reserve(pool.size());
    for (const auto &entry : pool.entries()) maps.push_back(approx_error_map(delta, w_hat, entry));
    IndexMap index = select_bitwidths(maps, policy.tau);
    const Tensor delta_q = mixed_quantize(delta, pool, index);

    const auto bits = pool.bit_widths();
    LayerBops cost;
    cost.layer = l;
    cost.macs = shape.macs();
    cost.weight_bits = pw.effective_bits();
    cost.act_bits = -1;
    for (auto v : index.values()) ++cost.act_histogram[bits[v - 1u]];
    cost.conv_bops = mixed_conv_bops(shape, cost.weight_bits, index, bits);
    cost.policy_bops = policy_overhead_bops(cur.extent(0), cur.extent(1), cur.extent(2), pool.size());
    r.costs.push_back(cost);

    Tensor z = reconstruct(layer, delta_q, w_hat, state.reference_output[l], cost.conv_bops == 0);
    r.residuals.push_back(std::move(delta));
    r.index_maps.push_back(std::move(index));
    if (state.mode == ResidualMode::Recurrent) {
      state.reference_input[l] = cur;
      state.reference_output[l] = z;
    }
    cur = apply_nonlinearity(z, layer.nonlinearity);
    r.layer_outputs.push_back(cur);
  }
  r.output = cur;
  return r;
}

std::vector<Tensor> SequenceResult::outputs() const {
  std::vector<Tensor> out;
  out.reserve(frames.size());
  for (const auto &f : frames) out.push_back(f.output);
  return out;
}

Session::Session(const ModelSpec &model, ScheduleConfig schedule, RunMode mode, PolicyConfig policy)
    : model_(&model), schedule_(schedule), mode_(mode), policy_(policy) {
  if (schedule_.period < 1) throw InvalidArgument("keyframe period must be >= 1");
  state_.mode = mode == RunMode::ResqRecurrent ? ResidualMode::Recurrent : ResidualMode::Pairwise;
}

ForwardResult Session::push(const Tensor &frame) {
  const std::size_t t = next_frame_;
  ForwardResult r;
  if (mode_ == RunMode::Frame) {
    r = frame_forward(*model_, frame, ParamSet::Keyframe);
  } else if (schedule_.is_keyframe(t)) {
    r = keyframe_forward(*model_, frame, state_);
  } else if (mode_ == RunMode::ResqDynamic) {
    r = dynamic_residual_forward(*model_, frame, state_, policy_);
  } else {
    r = residual_forward(*model_, frame, state_);
  }
  const bool key = mode_ == RunMode::Frame || schedule_.is_keyframe(t);
  for (auto &c : r.costs) {
    c.frame = t;
    c.is_keyframe = key;
  }
  ++next_frame_;
  return r;
}

SequenceResult run_sequence(const ModelSpec &model, std::span<const Tensor> clip, const ScheduleConfig &schedule,
                            RunMode mode, const PolicyConfig &policy) {
  if (clip.empty()) throw InvalidArgument("clip has no frames");
  Session session(model, schedule, mode, policy);
  SequenceResult out;
  std::vector<LayerBops> entries;
  for (const auto &frame : clip) {
    out.frames.push_back(session.push(frame));
    const auto &costs = out.frames.back().costs;
    entries.insert(entries.end(), costs.begin(), costs.end());
  }
  const ScheduleConfig effective = mode == RunMode::Frame ? ScheduleConfig{1} : schedule;
  out.report = sequence_report(effective, std::move(entries), clip.size());
  return out;
}

}  // namespace resq
