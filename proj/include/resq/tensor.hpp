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

#ifndef RESQ_TENSOR_HPP_
#define RESQ_TENSOR_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace resq {

using Shape = std::vector<std::size_t>;

std::size_t shape_volume(const Shape &shape);
std::string shape_to_string(const Shape &shape);

/*
 * Dense row-major float tensor. Activations use (C, H, W), weights use
 * (C_out, C_in, kH, kW), batches of activations use (N, C, H, W).
 * Every extent is positive and every value finite.
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  const Shape &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> values() const noexcept { return data_; }
  std::span<float> values() noexcept { return data_; }
  const float *data() const noexcept { return data_.data(); }
  float *data() noexcept { return data_.data(); }

  float operator[](std::size_t i) const noexcept { return data_[i]; }
  float &operator[](std::size_t i) noexcept { return data_[i]; }

  // (c, h, w) access for rank-3 tensors
  float at(std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  float &at(std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  /// Slice `index` along the leading axis; drops that axis.
  Tensor slice(std::size_t index) const;
  Tensor reshaped(Shape shape) const;

  /// Stack equally shaped tensors along a new leading axis.
  static Tensor stack(std::span<const Tensor> items);

  friend bool operator==(const Tensor &a, const Tensor &b) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

/*
 * Stride-1, dilation-1 cross-correlation.
 *   x: (C_in, H, W), w: (C_out, C_in, kH, kW)
 *   result: (C_out, H + 2p - kH + 1, W + 2p - kW + 1)
 * Accumulates in double.
 */
Tensor conv2d(const Tensor &x, const Tensor &w, std::size_t padding);

Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &a, float factor);
Tensor relu(const Tensor &a);

/// Per-pixel Euclidean norm over channels: (C, H, W) -> (H, W).
Tensor channel_norm_map(const Tensor &x);

double frobenius_norm(const Tensor &x);
double mean(const Tensor &x);
/// Population variance over every element.
double variance(const Tensor &x);
double mean_squared_error(const Tensor &a, const Tensor &b);
double max_abs(const Tensor &x);
float min_value(const Tensor &x);
float max_value(const Tensor &x);

void require_same_shape(const Tensor &a, const Tensor &b, const char *what);

// Raw Tensor File: "RTF1", u32 rank, rank x u32 extents, float32 payload,
// all little-endian.
void write_rtf(const std::filesystem::path &path, const Tensor &t);
Tensor read_rtf(const std::filesystem::path &path);
std::vector<unsigned char> encode_rtf(const Tensor &t);
Tensor decode_rtf(std::span<const unsigned char> bytes);

}  // namespace resq

#endif  // RESQ_TENSOR_HPP_
