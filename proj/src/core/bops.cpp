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

#include "resq/bops.hpp"

#include "resq/errors.hpp"

namespace resq {

ConvShape conv_shape(const Tensor &weights, std::size_t in_h, std::size_t in_w, std::size_t padding) {
  if (weights.rank() != 4) throw DimensionError("conv_shape needs rank-4 weights");
  ConvShape s;
  s.c_out = weights.extent(0);
  s.c_in = weights.extent(1);
  s.kernel_h = weights.extent(2);
  s.kernel_w = weights.extent(3);
  s.in_h = in_h;
  s.in_w = in_w;
  if (s.kernel_h > in_h + 2 * padding || s.kernel_w > in_w + 2 * padding) throw DimensionError("kernel larger than input");
  s.out_h = in_h + 2 * padding - s.kernel_h + 1;
  s.out_w = in_w + 2 * padding - s.kernel_w + 1;
  return s;
}

std::uint64_t conv_bops(const ConvShape &shape, int weight_bits, int act_bits) {
  if (weight_bits < 0 || act_bits < 0) throw InvalidArgument("bit-widths must be non-negative");
  return shape.macs() * static_cast<std::uint64_t>(weight_bits) * static_cast<std::uint64_t>(act_bits);
}

std::uint64_t mixed_conv_bops(const ConvShape &shape, int weight_bits, const IndexMap &index,
                              std::span<const int> pool_bits) {
  if (shape.out_h != shape.in_h || shape.out_w != shape.in_w) {
    throw DimensionError("per-pixel accounting requires same-padding layers");
  }
  if (index.height() != shape.in_h || index.width() != shape.in_w) throw DimensionError("index map does not match layer grid");
  // count pixels per pool index first; the sum is linear in the histogram
  std::vector<std::uint64_t> counts(pool_bits.size(), 0);
  for (auto v : index.values()) {
    if (v < 1 || v > pool_bits.size()) throw InvalidArgument("index map entry outside pool");
    ++counts[v - 1u];
  }
  std::uint64_t bit_sum = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (pool_bits[i] < 0) throw InvalidArgument("bit-widths must be non-negative");
    bit_sum += counts[i] * static_cast<std::uint64_t>(pool_bits[i]);
  }
  return shape.macs_per_pixel() * static_cast<std::uint64_t>(weight_bits) * bit_sum;
}

std::uint64_t policy_overhead_bops(std::size_t channels, std::size_t height, std::size_t width, std::size_t pool_size) {
  return std::uint64_t{channels} * height * width * 8u * 8u * pool_size;
}

BopReport sequence_report(const ScheduleConfig &schedule, std::vector<LayerBops> entries, std::size_t n_frames) {
  if (n_frames == 0) throw InvalidArgument("sequence report needs at least one frame");
  BopReport r;
  r.frames.resize(n_frames);
  for (std::size_t t = 0; t < n_frames; ++t) {
    r.frames[t].frame = t;
    r.frames[t].is_keyframe = schedule.is_keyframe(t);
    if (r.frames[t].is_keyframe) ++r.keyframes;
  }
  for (const auto &e : entries) {
    if (e.frame >= n_frames) throw InvalidArgument("entry frame index out of range");
    r.frames[e.frame].conv_bops += e.conv_bops;
    r.frames[e.frame].policy_bops += e.policy_bops;
    r.total_conv += e.conv_bops;
    r.total_policy += e.policy_bops;
  }
  r.entries = std::move(entries);
  r.amortized_conv = static_cast<double>(r.total_conv) / static_cast<double>(n_frames);
  r.amortized_total = static_cast<double>(r.total()) / static_cast<double>(n_frames);
  return r;
}

}  // namespace resq
