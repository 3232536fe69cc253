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

#ifndef RESQ_BOPS_HPP_
#define RESQ_BOPS_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "resq/dynamic_policy.hpp"
#include "resq/model.hpp"

namespace resq {

struct ConvShape {
  std::size_t c_in = 0, c_out = 0;
  std::size_t kernel_h = 0, kernel_w = 0;
  std::size_t in_h = 0, in_w = 0;
  std::size_t out_h = 0, out_w = 0;

  std::uint64_t macs_per_pixel() const noexcept { return std::uint64_t{c_out} * c_in * kernel_h * kernel_w; }
  std::uint64_t macs() const noexcept { return macs_per_pixel() * out_h * out_w; }
};

ConvShape conv_shape(const Tensor &weights, std::size_t in_h, std::size_t in_w, std::size_t padding);

/// MACs x b_w x b_a.
std::uint64_t conv_bops(const ConvShape &shape, int weight_bits, int act_bits);

/*
 * Sum over output pixels of macs_per_pixel x b_w x b_a(pixel), b_a read from
 * the aligned input pixel. Requires same-padding (input and output grids
 * coincide).
 */
std::uint64_t mixed_conv_bops(const ConvShape &shape, int weight_bits, const IndexMap &index,
                              std::span<const int> pool_bits);

/// Error-map cost: C*H*W MACs at 8x8 bits for every pool entry.
std::uint64_t policy_overhead_bops(std::size_t channels, std::size_t height, std::size_t width, std::size_t pool_size);

struct LayerBops {
  std::size_t frame = 0;
  std::size_t layer = 0;
  bool is_keyframe = false;
  std::uint64_t macs = 0;
  int weight_bits = 0;
  int act_bits = 0;                            // -1 when mixed per pixel
  std::map<int, std::uint64_t> act_histogram;  // bits -> pixel count, mixed layers only
  std::uint64_t conv_bops = 0;
  std::uint64_t policy_bops = 0;

  std::uint64_t total() const noexcept { return conv_bops + policy_bops; }
};

struct FrameBops {
  std::size_t frame = 0;
  bool is_keyframe = false;
  std::uint64_t conv_bops = 0;
  std::uint64_t policy_bops = 0;
  std::uint64_t total() const noexcept { return conv_bops + policy_bops; }
};

struct BopReport {
  std::vector<LayerBops> entries;
  std::vector<FrameBops> frames;
  std::size_t keyframes = 0;
  std::uint64_t total_conv = 0;
  std::uint64_t total_policy = 0;
  double amortized_conv = 0.0;   // per frame
  double amortized_total = 0.0;  // per frame, policy included

  std::uint64_t total() const noexcept { return total_conv + total_policy; }
};

/// Aggregates per-(frame, layer) entries; amortized = total / n_frames.
BopReport sequence_report(const ScheduleConfig &schedule, std::vector<LayerBops> entries, std::size_t n_frames);

}  // namespace resq

#endif  // RESQ_BOPS_HPP_
