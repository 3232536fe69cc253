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

#include "resq/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "resq/errors.hpp"

namespace resq {

std::size_t shape_volume(const Shape &shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape &shape) {
  if (shape.empty()) throw DimensionError("tensor rank must be at least 1");
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  if (!std::isfinite(fill)) throw InvalidArgument("tensor fill value must be finite");
  data_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
  check_extents(shape_);
  if (data_.size() != shape_volume(shape_)) {
    throw DimensionError("tensor " + shape_to_string(shape_) + " needs " + std::to_string(shape_volume(shape_)) +
                         " values, got " + std::to_string(data_.size()));
  }
  for (float v : data_) {
    if (!std::isfinite(v)) throw InvalidArgument("tensor values must be finite");
  }
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) throw DimensionError("axis out of range");
  return shape_[axis];
}

Tensor Tensor::slice(std::size_t index) const {
  if (shape_.size() < 2) throw DimensionError("slice needs rank >= 2");
  if (index >= shape_[0]) throw DimensionError("slice index out of range");
  Shape inner(shape_.begin() + 1, shape_.end());
  const std::size_t n = shape_volume(inner);
  std::vector<float> v(data_.begin() + static_cast<std::ptrdiff_t>(index * n),
                       data_.begin() + static_cast<std::ptrdiff_t>((index + 1) * n));
  Tensor out;
  out.shape_ = std::move(inner);
  out.data_ = std::move(v);
  return out;
}

Tensor Tensor::reshaped(Shape shape) const {
  check_extents(shape);
  if (shape_volume(shape) != data_.size()) throw DimensionError("reshape changes element count");
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

Tensor Tensor::stack(std::span<const Tensor> items) {
  if (items.empty()) throw DimensionError("cannot stack zero tensors");
  Shape shape{items.size()};
  shape.insert(shape.end(), items[0].shape().begin(), items[0].shape().end());
  Tensor out;
  out.shape_ = shape;
  out.data_.reserve(shape_volume(shape));
  for (const auto &t : items) {
    if (t.shape() != items[0].shape()) throw DimensionError("stack requires identical shapes");
    out.data_.insert(out.data_.end(), t.data_.begin(), t.data_.end());
  }
  return out;
}

Tensor conv2d(const Tensor &x, const Tensor &w, std::size_t padding) {
  if (x.rank() != 3) throw DimensionError("conv2d input must be (C, H, W), got " + shape_to_string(x.shape()));
  if (w.rank() != 4) throw DimensionError("conv2d weights must be (Co, Ci, kH, kW), got " + shape_to_string(w.shape()));
  const std::size_t cin = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const std::size_t cout = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  if (w.extent(1) != cin) {
    throw DimensionError("conv2d channel mismatch: input " + shape_to_string(x.shape()) + " weights " +
                         shape_to_string(w.shape()));
  }
  if (kh > h + 2 * padding || kw > wd + 2 * padding) throw DimensionError("conv2d kernel larger than padded input");
  const std::size_t ho = h + 2 * padding - kh + 1;
  const std::size_t wo = wd + 2 * padding - kw + 1;

  const auto p = static_cast<std::ptrdiff_t>(padding);
  std::vector<float> out(cout * ho * wo);
  std::vector<double> acc(ho * wo);
  const float *xd = x.data();
  const float *wdat = w.data();
  for (std::size_t co = 0; co < cout; ++co) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const float *plane = xd + ci * h * wd;
      for (std::size_t i = 0; i < kh; ++i) {
        for (std::size_t j = 0; j < kw; ++j) {
          const double wv = wdat[((co * cin + ci) * kh + i) * kw + j];
          if (wv == 0.0) continue;
          // output column range whose tap (i, j) lands inside the input
          const std::ptrdiff_t off_w = static_cast<std::ptrdiff_t>(j) - p;
          const std::ptrdiff_t ow_lo = std::max<std::ptrdiff_t>(0, -off_w);
          const std::ptrdiff_t ow_hi =
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(wo), static_cast<std::ptrdiff_t>(wd) - off_w);
          for (std::size_t oh = 0; oh < ho; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + i) - p;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
            const float *row = plane + static_cast<std::size_t>(ih) * wd;
            double *arow = acc.data() + oh * wo;
            for (std::ptrdiff_t ow = ow_lo; ow < ow_hi; ++ow) arow[ow] += wv * row[ow + off_w];
          }
        }
      }
    }
    float *o = out.data() + co * ho * wo;
    for (std::size_t k = 0; k < ho * wo; ++k) o[k] = static_cast<float>(acc[k]);
  }
  return Tensor({cout, ho, wo}, std::move(out));
}

void require_same_shape(const Tensor &a, const Tensor &b, const char *what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

Tensor add(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor sub(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor scale(const Tensor &a, float factor) {
  Tensor out = a;
  for (auto &v : out.values()) v *= factor;
  return out;
}

Tensor relu(const Tensor &a) {
  Tensor out = a;
  for (auto &v : out.values()) v = std::max(v, 0.0f);
  return out;
}

Tensor channel_norm_map(const Tensor &x) {
  if (x.rank() != 3) throw DimensionError("channel_norm_map expects (C, H, W)");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  std::vector<double> acc(h * w, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float *plane = x.data() + ch * h * w;
    for (std::size_t i = 0; i < h * w; ++i) acc[i] += static_cast<double>(plane[i]) * plane[i];
  }
  std::vector<float> out(h * w);
  for (std::size_t i = 0; i < h * w; ++i) out[i] = static_cast<float>(std::sqrt(acc[i]));
  return Tensor({h, w}, std::move(out));
}

double frobenius_norm(const Tensor &x) {
  double s = 0.0;
  for (float v : x.values()) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

double mean(const Tensor &x) {
  if (x.empty()) throw DimensionError("mean of empty tensor");
  double s = 0.0;
  for (float v : x.values()) s += v;
  return s / static_cast<double>(x.size());
}

double variance(const Tensor &x) {
  const double m = mean(x);
  double s = 0.0;
  for (float v : x.values()) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

double mean_squared_error(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "mean_squared_error");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double max_abs(const Tensor &x) {
  double m = 0.0;
  for (float v : x.values()) m = std::max(m, static_cast<double>(std::fabs(v)));
  return m;
}

float min_value(const Tensor &x) {
  if (x.empty()) throw DimensionError("min of empty tensor");
  return *std::min_element(x.values().begin(), x.values().end());
}

float max_value(const Tensor &x) {
  if (x.empty()) throw DimensionError("max of empty tensor");
  return *std::max_element(x.values().begin(), x.values().end());
}

namespace {

constexpr char kRtfMagic[4] = {'R', 'T', 'F', '1'};

void put_u32(std::vector<unsigned char> &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::span<const unsigned char> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<unsigned char> encode_rtf(const Tensor &t) {
  std::vector<unsigned char> out(kRtfMagic, kRtfMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  out.reserve(out.size() + 4 * t.size());
  for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_rtf(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kRtfMagic, 4) != 0) throw ParseError("not an RTF1 stream");
  const std::uint32_t rank = get_u32(bytes, 4);
  if (rank == 0 || bytes.size() < 8 + 4ull * rank) throw ParseError("truncated RTF header");
  Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = get_u32(bytes, 8 + 4 * i);
  const std::size_t header = 8 + 4ull * rank;
  const std::size_t n = shape_volume(shape);
  if (bytes.size() != header + 4 * n) throw ParseError("RTF payload size does not match extents");
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
  return Tensor(std::move(shape), std::move(values));
}

void write_rtf(const std::filesystem::path &path, const Tensor &t) {
  const auto bytes = encode_rtf(t);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Tensor read_rtf(const std::filesystem::path &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_rtf(bytes);
}

}  // namespace resq
