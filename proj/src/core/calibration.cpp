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

#include "resq/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <sstream>

#include "resq/engine.hpp"
#include "resq/errors.hpp"

namespace resq {

std::string PrecisionConfig::to_string() const {
  std::ostringstream os;
  os << 'W' << keyframe_weight_bits << 'A' << keyframe_act_bits << "|W" << residual_weight_bits << 'A';
  if (has_pool()) {
    os << '{';
    for (std::size_t i = 0; i < residual_act_bits.size(); ++i) os << (i ? "," : "") << residual_act_bits[i];
    os << '}';
  } else {
    os << residual_act_bits.front();
  }
  return os.str();
}

std::vector<int> parse_bit_list(const std::string &list) {
  std::vector<int> bits;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty() || !std::all_of(item.begin(), item.end(), ::isdigit)) throw ParseError("bad bit list '" + list + "'");
    bits.push_back(std::stoi(item));
  }
  if (bits.empty()) throw ParseError("empty bit list");
  return bits;
}

PrecisionConfig parse_precision(const std::string &notation) {
  static const std::regex re(R"(^W(\d+)A(\d+)(?:\|W(\d+)A(?:(\d+)|\{([0-9, ]+)\}))?$)");
  std::smatch m;
  if (!std::regex_match(notation, m, re)) throw ParseError("bad precision notation '" + notation + "'");
  PrecisionConfig p;
  p.keyframe_weight_bits = std::stoi(m[1]);
  p.keyframe_act_bits = std::stoi(m[2]);
  if (m[3].matched) {
    p.residual_weight_bits = std::stoi(m[3]);
    p.residual_act_bits = m[4].matched ? std::vector<int>{std::stoi(m[4])} : parse_bit_list(m[5]);
  } else {
    p.residual_weight_bits = p.keyframe_weight_bits;
    p.residual_act_bits = {p.keyframe_act_bits};
  }
  if (p.keyframe_weight_bits < 1 || p.keyframe_act_bits < 1 || p.residual_weight_bits < 1) {
    throw ParseError("keyframe and weight bit-widths must be >= 1 in '" + notation + "'");
  }
  if (!p.has_pool() && p.residual_act_bits.front() < 1) throw ParseError("static residual bits must be >= 1");
  if (p.has_pool()) {
    for (std::size_t i = 1; i < p.residual_act_bits.size(); ++i) {
      if (p.residual_act_bits[i] <= p.residual_act_bits[i - 1]) throw ParseError("pool bit-widths must ascend strictly");
    }
  }
  return p;
}

std::vector<Range> weight_minmax_range(const Tensor &w, Granularity granularity) {
  if (w.empty()) throw InvalidArgument("empty weights");
  const std::size_t channels = granularity == Granularity::PerChannel ? w.extent(0) : 1;
  const std::size_t stride = w.size() / channels;
  std::vector<Range> ranges;
  for (std::size_t c = 0; c < channels; ++c) {
    const auto first = w.values().begin() + static_cast<std::ptrdiff_t>(c * stride);
    const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(stride));
    ranges.push_back({std::min(0.0, static_cast<double>(*lo)), std::max(0.0, static_cast<double>(*hi))});
  }
  return ranges;
}

QuantParams weight_minmax_params(const Tensor &w, Granularity granularity, int bits) {
  auto ranges = weight_minmax_range(w, granularity);
  if (granularity == Granularity::PerChannel) return QuantParams::per_channel(bits, std::move(ranges));
  return QuantParams::per_tensor(bits, ranges.front());
}

Tensor collect_activations(const ModelSpec &model, std::size_t layer, std::span<const Clip> clips,
                           ActivationSource source, const CalibrationConfig &config) {
  if (clips.empty()) throw InvalidArgument("no calibration clips");
  if (layer >= model.layers.size()) throw InvalidArgument("layer index out of range");
  if (config.period < 1) throw InvalidArgument("keyframe period must be >= 1");
  const ModelSpec upstream = model.prefix(layer);
  const ScheduleConfig schedule{config.period};

  std::vector<Tensor> samples;
  for (const auto &clip : clips) {
    if (samples.size() >= config.samples) break;
    std::vector<Tensor> inputs;
    if (upstream.layers.empty()) {
      inputs.assign(clip.begin(), clip.end());
    } else {
      for (auto &f : run_sequence(upstream, clip, schedule, RunMode::ResqPairwise).frames) inputs.push_back(std::move(f.output));
    }
    Tensor reference;
    for (std::size_t t = 0; t < inputs.size() && samples.size() < config.samples; ++t) {
      if (schedule.is_keyframe(t)) {
        reference = inputs[t];
        if (source == ActivationSource::Frame) samples.push_back(inputs[t]);
      } else if (source == ActivationSource::Residual) {
        samples.push_back(sub(inputs[t], reference));
      }
    }
  }
  if (samples.empty()) {
    throw InvalidArgument(source == ActivationSource::Residual ? "schedule yields no residual frames for calibration"
                                                               : "no calibration frames");
  }
  return Tensor::stack(samples);
}

namespace {

std::vector<Tensor> reference_outputs(const Tensor &batch, const Tensor &w, std::size_t padding) {
  std::vector<Tensor> refs;
  for (std::size_t n = 0; n < batch.extent(0); ++n) refs.push_back(conv2d(batch.slice(n), w, padding));
  return refs;
}

double objective_with_refs(const Tensor &batch, const std::vector<Tensor> &refs, const Tensor &w_hat,
                           std::size_t padding, const QuantParams &params) {
  double sq = 0.0;
  for (std::size_t n = 0; n < batch.extent(0); ++n) {
    const Tensor out = conv2d(fake_quantize(batch.slice(n), params), w_hat, padding);
    const Tensor &ref = refs[n];
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = static_cast<double>(ref[i]) - out[i];
      sq += d * d;
    }
  }
  return std::sqrt(sq);
}

void check_batch(const Tensor &batch) {
  if (batch.rank() != 4) throw DimensionError("activation batch must be (N, C, H, W), got " + shape_to_string(batch.shape()));
}

}  // namespace

double range_objective(const Tensor &batch, const Tensor &w, const Tensor &w_hat, std::size_t padding,
                       const QuantParams &params) {
  check_batch(batch);
  return objective_with_refs(batch, reference_outputs(batch, w, padding), w_hat, padding, params);
}

std::vector<double> search_grid(const Tensor &batch, std::size_t points) {
  if (points < 2) throw InvalidArgument("line search needs at least two grid points");
  const double lo = std::min(0.0, static_cast<double>(min_value(batch)));
  const double hi = std::max(0.0, static_cast<double>(max_value(batch)));
  std::vector<double> grid(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = lo + step * static_cast<double>(i);
  grid.back() = hi;
  return grid;
}

LineSearchResult line_search_activation_range(const Tensor &batch, const Tensor &w, const QuantParams &w_params,
                                              std::size_t padding, int bits, std::size_t grid_points) {
  check_batch(batch);
  if (bits < 1) throw InvalidArgument("line search needs b >= 1");
  const auto grid = search_grid(batch, grid_points);

  // distinct magnitudes m = max(r_max, -r_min), each with its first pair
  std::map<double, Range> candidates;
  for (double r_min : grid) {
    if (r_min > 0.0) continue;
    for (double r_max : grid) {
      if (r_max < 0.0) continue;
      candidates.try_emplace(std::max(r_max, -r_min), Range{r_min, r_max});
    }
  }

  const Tensor w_hat = fake_quantize(w, w_params);
  const auto refs = reference_outputs(batch, w, padding);
  LineSearchResult best;
  bool first = true;
  for (const auto &[magnitude, range] : candidates) {
    QuantParams p = QuantParams::per_tensor(bits, range);
    const double obj = objective_with_refs(batch, refs, w_hat, padding, p);
    if (first || obj < best.objective) {
      best.params = std::move(p);
      best.range = range;
      best.objective = obj;
      first = false;
    }
  }
  best.candidates = candidates.size();
  return best;
}

ModelSpec calibrate_model(const ModelSpec &model, std::span<const Clip> clips, const PrecisionConfig &precision,
                          const CalibrationConfig &config) {
  if (config.samples < 1) throw InvalidArgument("calibration needs c >= 1");
  if (config.grid < 2) throw InvalidArgument("calibration needs r >= 2");
  ModelSpec out = model.full_precision();
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    Layer &layer = out.layers[l];
    auto &q = layer.quant;
    q.keyframe_weight = weight_minmax_params(layer.weights, config.weight_granularity, precision.keyframe_weight_bits);
    q.residual_weight = weight_minmax_params(layer.weights, config.weight_granularity, precision.residual_weight_bits);

    CalibrationConfig frame_config = config;
    if (config.frame_only) frame_config.period = 1;
    const Tensor frames = collect_activations(out, l, clips, ActivationSource::Frame, frame_config);
    q.keyframe_act =
        line_search_activation_range(frames, layer.weights, q.keyframe_weight, layer.padding, precision.keyframe_act_bits, config.grid)
            .params;
    if (config.frame_only) {
      q.residual_weight = q.keyframe_weight;
      q.residual_act = q.keyframe_act;
      continue;
    }

    const Tensor residuals = collect_activations(out, l, clips, ActivationSource::Residual, config);
    std::vector<QuantParams> entries;
    for (int bits : precision.residual_act_bits) {
      if (bits == 0) {
        entries.push_back(QuantParams::zero_bit());
      } else {
        entries.push_back(
            line_search_activation_range(residuals, layer.weights, q.residual_weight, layer.padding, bits, config.grid).params);
      }
    }
    if (precision.has_pool()) {
      q.residual_act = QuantizerPool(std::move(entries));
    } else {
      q.residual_act = std::move(entries.front());
    }
  }
  return out;
}

}  // namespace resq
