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

#include "resq/dynamic_policy.hpp"

#include "resq/errors.hpp"

namespace resq {

QuantizerPool::QuantizerPool(std::vector<QuantParams> entries) : entries_(std::move(entries)) {
  if (entries_.size() < 2) throw InvalidArgument("quantizer pool needs at least two entries");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto &e = entries_[i];
    if (e.is_passthrough()) throw InvalidArgument("pool entries must be real quantizers");
    if (e.granularity() != Granularity::PerTensor) throw InvalidArgument("pool entries must be per-tensor");
    if (i > 0 && e.bit_width() <= entries_[i - 1].bit_width()) {
      throw InvalidArgument("pool entries must be strictly ascending in bit-width");
    }
  }
}

std::vector<int> QuantizerPool::bit_widths() const {
  std::vector<int> bits;
  for (const auto &e : entries_) bits.push_back(e.bit_width());
  return bits;
}

IndexMap::IndexMap(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), values_(height * width, fill) {}

Tensor exact_error_map(const Tensor &delta, const Tensor &w_hat, const QuantParams &entry, std::size_t padding) {
  const Tensor projected = conv2d(activation_quant_error(delta, entry), w_hat, padding);
  return channel_norm_map(projected);
}

Tensor approx_error_map(const Tensor &delta, const Tensor &w_hat, const QuantParams &entry) {
  const Tensor local = channel_norm_map(activation_quant_error(delta, entry));
  return scale(local, static_cast<float>(frobenius_norm(w_hat)));
}

IndexMap select_bitwidths(std::span<const Tensor> error_maps, double tau) {
  if (error_maps.size() < 2) throw InvalidArgument("policy needs at least two error maps");
  if (error_maps.size() > 255) throw InvalidArgument("pool too large");
  const Tensor &first = error_maps.front();
  if (first.rank() != 2) throw DimensionError("error maps must be (H, W)");
  for (const auto &m : error_maps) require_same_shape(first, m, "select_bitwidths");

  const std::size_t n = error_maps.size();
  const std::size_t h = first.extent(0), w = first.extent(1);
  IndexMap index(h, w, static_cast<std::uint8_t>(n));
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double gap = static_cast<double>(error_maps[i][p]) - error_maps[i + 1][p];
      if (gap < tau) {
        index(p / w, p % w) = static_cast<std::uint8_t>(i + 1);
        break;
      }
    }
  }
  return index;
}

Tensor mixed_quantize(const Tensor &delta, const QuantizerPool &pool, const IndexMap &index) {
  if (delta.rank() != 3) throw DimensionError("mixed_quantize expects (C, H, W)");
  const std::size_t c = delta.extent(0), h = delta.extent(1), w = delta.extent(2);
  if (index.height() != h || index.width() != w) throw DimensionError("index map does not match residual grid");
  Tensor out = delta;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sel = index(y, x);
      if (sel < 1 || sel > pool.size()) throw InvalidArgument("index map entry outside pool");
      const QuantParams &q = pool.entry(sel - 1);
      const double s = q.is_zero_bit() ? 0.0 : q.scale();
      for (std::size_t ch = 0; ch < c; ++ch) out.at(ch, y, x) = fake_quantize_value(delta.at(ch, y, x), s, q);
    }
  }
  return out;
}

Tensor selected_bits(const IndexMap &index, const QuantizerPool &pool) {
  Tensor out({index.height(), index.width()});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(pool.entry(index.values()[i] - 1u).bit_width());
  return out;
}

}  // namespace resq
