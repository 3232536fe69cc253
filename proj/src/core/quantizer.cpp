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

#include "resq/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "resq/errors.hpp"

namespace resq {

namespace {

constexpr int kMaxBits = 24;

void check_bits(int bits) {
  if (bits < 1 || bits > kMaxBits) throw InvalidArgument("bit-width must be in [1, 24], got " + std::to_string(bits));
}

void check_range(const Range &r) {
  if (!(r.min <= 0.0 && r.max >= 0.0) || !std::isfinite(r.min) || !std::isfinite(r.max)) {
    throw InvalidArgument("quantization range must satisfy r_min <= 0 <= r_max");
  }
}

std::size_t channel_stride(const Tensor &x, const QuantParams &p) {
  if (p.granularity() == Granularity::PerTensor) return x.size();
  if (x.rank() < 1 || x.extent(0) != p.channels()) {
    throw DimensionError("per-channel params have " + std::to_string(p.channels()) + " scales but tensor is " +
                         shape_to_string(x.shape()));
  }
  return x.size() / p.channels();
}

}  // namespace

double compute_scale(double r_max, double r_min, int bits) {
  check_bits(bits);
  check_range({r_min, r_max});
  const double m = std::max(r_max, -r_min);
  if (m == 0.0) throw DegenerateRangeError("scale undefined for zero range");
  return 2.0 * m / (std::ldexp(1.0, bits) - 1.0);
}

double minimal_scale(int bits) {
  check_bits(bits);
  return std::ldexp(1.0, -24) / (std::ldexp(1.0, bits) - 1.0);
}

double scale_for_range(const Range &range, int bits) {
  check_range(range);
  if (range.max == 0.0 && range.min == 0.0) return minimal_scale(bits);
  return compute_scale(range.max, range.min, bits);
}

QuantParams QuantParams::per_tensor(int bits, Range range) {
  QuantParams p;
  p.bits_ = bits;
  p.passthrough_ = false;
  p.granularity_ = Granularity::PerTensor;
  p.scales_ = {scale_for_range(range, bits)};
  p.ranges_ = {range};
  return p;
}

QuantParams QuantParams::per_channel(int bits, std::vector<Range> ranges) {
  if (ranges.empty()) throw InvalidArgument("per-channel params need at least one channel");
  QuantParams p;
  p.bits_ = bits;
  p.passthrough_ = false;
  p.granularity_ = Granularity::PerChannel;
  p.scales_.reserve(ranges.size());
  for (const auto &r : ranges) p.scales_.push_back(scale_for_range(r, bits));
  p.ranges_ = std::move(ranges);
  return p;
}

QuantParams QuantParams::zero_bit() {
  QuantParams p;
  p.bits_ = 0;
  p.passthrough_ = false;
  return p;
}

QuantParams QuantParams::passthrough() { return QuantParams(); }

std::int32_t QuantParams::code_min() const noexcept {
  return bits_ >= 1 ? -(std::int32_t{1} << (bits_ - 1)) : 0;
}

std::int32_t QuantParams::code_max() const noexcept {
  return bits_ >= 1 ? (std::int32_t{1} << (bits_ - 1)) - 1 : 0;
}

namespace {

inline double round_clamp(float x, double scale, double lo, double hi) {
  // nearbyint honours the default round-to-nearest-even mode
  return std::clamp(std::nearbyint(static_cast<double>(x) / scale), lo, hi);
}

}  // namespace

float fake_quantize_value(float x, double scale, const QuantParams &params) {
  if (params.is_passthrough()) return x;
  if (params.is_zero_bit()) return 0.0f;
  const double q = round_clamp(x, scale, params.code_min(), params.code_max());
  return static_cast<float>(scale * q);
}

Tensor fake_quantize(const Tensor &x, const QuantParams &params) {
  if (params.is_passthrough()) return x;
  if (params.is_zero_bit()) return Tensor(x.shape(), 0.0f);
  const std::size_t stride = channel_stride(x, params);
  const double lo = params.code_min(), hi = params.code_max();
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = params.scales()[i / stride];
    out[i] = static_cast<float>(s * round_clamp(x[i], s, lo, hi));
  }
  return out;
}

QuantizedTensor quantize_to_codes(const Tensor &x, const QuantParams &params) {
  if (params.is_passthrough()) throw InvalidArgument("passthrough params have no integer representation");
  QuantizedTensor q{x.shape(), {}, params};
  if (params.is_zero_bit()) return q;
  const std::size_t stride = channel_stride(x, params);
  const double lo = params.code_min(), hi = params.code_max();
  q.codes.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    q.codes[i] = static_cast<std::int32_t>(round_clamp(x[i], params.scales()[i / stride], lo, hi));
  }
  return q;
}

Tensor dequantize(const QuantizedTensor &q) {
  if (q.params.is_zero_bit()) return Tensor(q.shape, 0.0f);
  std::vector<float> v(q.codes.size());
  const std::size_t stride =
      q.params.granularity() == Granularity::PerTensor ? q.codes.size() : q.codes.size() / q.params.channels();
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<float>(q.params.scales()[i / stride] * static_cast<double>(q.codes[i]));
  }
  return Tensor(q.shape, std::move(v));
}

Tensor quantized_conv2d(const QuantizedTensor &x, const QuantizedTensor &w, std::size_t padding) {
  if (x.shape.size() != 3 || w.shape.size() != 4) throw DimensionError("quantized_conv2d expects (C,H,W) and (Co,Ci,kH,kW)");
  if (x.params.granularity() != Granularity::PerTensor) throw InvalidArgument("activation codes must be per-tensor");
  const std::size_t cin = x.shape[0], h = x.shape[1], wd = x.shape[2];
  const std::size_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  if (w.shape[1] != cin) throw DimensionError("quantized_conv2d channel mismatch");
  if (kh > h + 2 * padding || kw > wd + 2 * padding) throw DimensionError("kernel larger than padded input");
  const std::size_t ho = h + 2 * padding - kh + 1, wo = wd + 2 * padding - kw + 1;
  if (x.params.is_zero_bit() || w.params.is_zero_bit()) return Tensor({cout, ho, wo}, 0.0f);

  const auto p = static_cast<std::ptrdiff_t>(padding);
  std::vector<float> out(cout * ho * wo);
  std::vector<std::int64_t> acc(ho * wo);
  for (std::size_t co = 0; co < cout; ++co) {
    std::fill(acc.begin(), acc.end(), 0);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t i = 0; i < kh; ++i) {
        for (std::size_t j = 0; j < kw; ++j) {
          const std::int64_t wv = w.codes[((co * cin + ci) * kh + i) * kw + j];
          if (wv == 0) continue;
          for (std::size_t oh = 0; oh < ho; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + i) - p;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ow = 0; ow < wo; ++ow) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + j) - p;
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(wd)) continue;
              acc[oh * wo + ow] += wv * x.codes[(ci * h + static_cast<std::size_t>(ih)) * wd + static_cast<std::size_t>(iw)];
            }
          }
        }
      }
    }
    const double s = x.params.scale() * w.params.scale(co);
    for (std::size_t k = 0; k < ho * wo; ++k) out[co * ho * wo + k] = static_cast<float>(s * static_cast<double>(acc[k]));
  }
  return Tensor({cout, ho, wo}, std::move(out));
}

Tensor weight_quant_error(const Tensor &x, const Tensor &w, const QuantParams &params_w, std::size_t padding) {
  return sub(conv2d(x, w, padding), conv2d(x, fake_quantize(w, params_w), padding));
}

Tensor activation_quant_error(const Tensor &x, const QuantParams &params_a) {
  return sub(x, fake_quantize(x, params_a));
}

void to_json(nlohmann::json &j, const QuantParams &p) {
  if (p.is_passthrough()) {
    j = {{"bit_width", nullptr}, {"granularity", "passthrough"}, {"scales", nlohmann::json::array()}};
    return;
  }
  j["bit_width"] = p.bit_width();
  j["granularity"] = p.granularity() == Granularity::PerTensor ? "per-tensor" : "per-channel";
  j["scales"] = std::vector<double>(p.scales().begin(), p.scales().end());
  Range envelope;
  for (const auto &r : p.ranges()) {
    envelope.min = std::min(envelope.min, r.min);
    envelope.max = std::max(envelope.max, r.max);
  }
  j["range"] = {{"min", envelope.min}, {"max", envelope.max}};
  if (p.granularity() == Granularity::PerChannel) {
    auto arr = nlohmann::json::array();
    for (const auto &r : p.ranges()) arr.push_back({{"min", r.min}, {"max", r.max}});
    j["ranges"] = std::move(arr);
  }
}

void from_json(const nlohmann::json &j, QuantParams &p) {
  try {
    const std::string gran = j.at("granularity").get<std::string>();
    if (gran == "passthrough") {
      p = QuantParams::passthrough();
      return;
    }
    const int bits = j.at("bit_width").get<int>();
    if (bits == 0) {
      p = QuantParams::zero_bit();
      return;
    }
    if (gran == "per-tensor") {
      const auto &r = j.at("range");
      p = QuantParams::per_tensor(bits, {r.at("min").get<double>(), r.at("max").get<double>()});
    } else if (gran == "per-channel") {
      std::vector<Range> ranges;
      for (const auto &r : j.at("ranges")) ranges.push_back({r.at("min").get<double>(), r.at("max").get<double>()});
      p = QuantParams::per_channel(bits, std::move(ranges));
    } else {
      throw ParseError("unknown granularity '" + gran + "'");
    }
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("malformed quantizer params: ") + e.what());
  }
  const auto stored = j.at("scales").get<std::vector<double>>();
  if (!std::equal(stored.begin(), stored.end(), p.scales().begin(), p.scales().end())) {
    throw ParseError("stored scales are inconsistent with stored ranges");
  }
}

}  // namespace resq
