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

#ifndef RESQ_DYNAMIC_POLICY_HPP_
#define RESQ_DYNAMIC_POLICY_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "resq/quantizer.hpp"
#include "resq/tensor.hpp"

namespace resq {

/*
 * Activation quantizers available to residual pixels, strictly ascending in
 * bit-width. A zero-bit entry may only come first.
 */
class QuantizerPool {
 public:
  QuantizerPool() = default;
  explicit QuantizerPool(std::vector<QuantParams> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  const QuantParams &entry(std::size_t i) const { return entries_.at(i); }
  std::span<const QuantParams> entries() const noexcept { return entries_; }
  const QuantParams &highest() const { return entries_.back(); }
  std::vector<int> bit_widths() const;

  friend bool operator==(const QuantizerPool &, const QuantizerPool &) = default;

 private:
  std::vector<QuantParams> entries_;
};

/// Per-pixel 1-based pool index (H x W).
class IndexMap {
 public:
  IndexMap() = default;
  IndexMap(std::size_t height, std::size_t width, std::uint8_t fill = 1);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::uint8_t operator()(std::size_t h, std::size_t w) const noexcept { return values_[h * width_ + w]; }
  std::uint8_t &operator()(std::size_t h, std::size_t w) noexcept { return values_[h * width_ + w]; }
  std::span<const std::uint8_t> values() const noexcept { return values_; }

  friend bool operator==(const IndexMap &, const IndexMap &) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> values_;
};

struct PolicyConfig {
  double tau = 0.0003;
};

/// Pixel-wise channel norm of conv(delta - q(delta), w_hat). Reference only.
Tensor exact_error_map(const Tensor &delta, const Tensor &w_hat, const QuantParams &entry, std::size_t padding);

/// channel_norm_map(delta - q(delta)) * ||w_hat||_F, on the input grid.
Tensor approx_error_map(const Tensor &delta, const Tensor &w_hat, const QuantParams &entry);

/*
 * For each pixel, the first index i (1-based) with eps_i - eps_{i+1} < tau,
 * scanning from the lowest precision. Falls back to n when no gap qualifies.
 */
IndexMap select_bitwidths(std::span<const Tensor> error_maps, double tau);

/// Quantizes every channel at pixel (h, w) with pool entry index(h, w).
Tensor mixed_quantize(const Tensor &delta, const QuantizerPool &pool, const IndexMap &index);

/// Bit-width chosen at each pixel, as a float map (for reporting).
Tensor selected_bits(const IndexMap &index, const QuantizerPool &pool);

}  // namespace resq

#endif  // RESQ_DYNAMIC_POLICY_HPP_
