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

#ifndef RESQ_QUANTIZER_HPP_
#define RESQ_QUANTIZER_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "resq/tensor.hpp"

namespace resq {

enum class Granularity { PerTensor, PerChannel };

/// Bit-width charged for unquantized (float) operands in BOP accounting.
inline constexpr int kFloatBits = 32;

struct Range {
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const Range &, const Range &) = default;
};

/*
 * s = 2 * max(r_max, -r_min) / (2^b - 1).
 * Throws DegenerateRangeError when both bounds are zero and InvalidArgument
 * when b < 1 or the range does not straddle zero.
 */
double compute_scale(double r_max, double r_min, int bits);

/// Scale assigned to an all-zero range: 2^-24 / (2^b - 1).
double minimal_scale(int bits);

/// compute_scale, falling back to minimal_scale for degenerate ranges.
double scale_for_range(const Range &range, int bits);

/*
 * Parameters of a symmetric signed uniform quantizer. Three special cases:
 *   - zero-bit: quantizes everything to 0 and costs no compute;
 *   - passthrough: quantization disabled, values pass unchanged;
 *   - regular: b >= 1 with one scale (per-tensor) or one per leading-axis
 *     channel (per-channel).
 */
class QuantParams {
 public:
  QuantParams() = default;

  static QuantParams per_tensor(int bits, Range range);
  static QuantParams per_channel(int bits, std::vector<Range> ranges);
  static QuantParams zero_bit();
  static QuantParams passthrough();

  int bit_width() const noexcept { return bits_; }
  /// Bits charged by the accounting (kFloatBits for passthrough).
  int effective_bits() const noexcept { return passthrough_ ? kFloatBits : bits_; }
  bool is_passthrough() const noexcept { return passthrough_; }
  bool is_zero_bit() const noexcept { return !passthrough_ && bits_ == 0; }
  Granularity granularity() const noexcept { return granularity_; }
  std::span<const double> scales() const noexcept { return scales_; }
  std::span<const Range> ranges() const noexcept { return ranges_; }
  double scale(std::size_t channel = 0) const { return scales_.at(granularity_ == Granularity::PerTensor ? 0 : channel); }
  std::size_t channels() const noexcept { return scales_.size(); }

  std::int32_t code_min() const noexcept;
  std::int32_t code_max() const noexcept;

  friend bool operator==(const QuantParams &, const QuantParams &) = default;

 private:
  int bits_ = 0;
  bool passthrough_ = true;
  Granularity granularity_ = Granularity::PerTensor;
  std::vector<double> scales_;
  std::vector<Range> ranges_;
};

struct QuantizedTensor {
  Shape shape;
  std::vector<std::int32_t> codes;  // empty for zero-bit params
  QuantParams params;
};

/// s * clamp(round_half_even(x / s), -2^(b-1), 2^(b-1) - 1), elementwise.
Tensor fake_quantize(const Tensor &x, const QuantParams &params);
float fake_quantize_value(float x, double scale, const QuantParams &params);

QuantizedTensor quantize_to_codes(const Tensor &x, const QuantParams &params);
Tensor dequantize(const QuantizedTensor &q);

/*
 * Fixed-point convolution: integer codes accumulated exactly, then rescaled
 * by s_w * s_a (per output channel for per-channel weights). Activations must
 * be per-tensor.
 */
Tensor quantized_conv2d(const QuantizedTensor &x, const QuantizedTensor &w, std::size_t padding);

/// conv(x, w) - conv(x, fake_quantize(w)).
Tensor weight_quant_error(const Tensor &x, const Tensor &w, const QuantParams &params_w, std::size_t padding = 0);
/// x - fake_quantize(x).
Tensor activation_quant_error(const Tensor &x, const QuantParams &params_a);

void to_json(nlohmann::json &j, const QuantParams &p);
void from_json(const nlohmann::json &j, QuantParams &p);

}  // namespace resq

#endif  // RESQ_QUANTIZER_HPP_
