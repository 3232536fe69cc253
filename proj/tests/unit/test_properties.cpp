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

// Randomized invariants across modules.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "resq/bops.hpp"
#include "resq/dynamic_policy.hpp"
#include "resq/quantizer.hpp"

namespace resq {
namespace {

class QuantizerProperty : public ::testing::TestWithParam<int> {};

TEST_P(QuantizerProperty, IdempotentMonotoneBounded) {
  const int bits = GetParam();
  std::mt19937_64 rng(static_cast<std::uint64_t>(bits) * 7919u);
  std::uniform_real_distribution<double> r(0.01, 4.0);
  for (int trial = 0; trial < 8; ++trial) {
    const QuantParams p = QuantParams::per_tensor(bits, {-r(rng), r(rng)});
    const double s = p.scale();
    Tensor x = oracle::random_tensor({2048}, rng, -6.0, 6.0);
    std::sort(x.values().begin(), x.values().end());
    const Tensor q = fake_quantize(x, p);
    EXPECT_EQ(fake_quantize(q, p), q);
    for (std::size_t i = 1; i < q.size(); ++i) ASSERT_LE(q[i - 1], q[i]);
    const double limit = s * (std::ldexp(1.0, bits - 1) - 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::fabs(x[i]) <= limit) {
        ASSERT_LE(std::fabs(static_cast<double>(x[i]) - q[i]), s / 2 * (1 + 1e-6));
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Bits, QuantizerProperty, ::testing::Values(1, 2, 3, 4, 5, 6, 8, 10, 16));

TEST(QuantizerProperty, ErrorShrinksWithBitsAtFixedRange) {
  std::mt19937_64 rng(11);
  const Range range{-1.2, 0.9};
  const Tensor x = oracle::random_tensor({4000}, rng, range.min, range.max);
  double prev = std::numeric_limits<double>::infinity();
  for (int b = 1; b <= 12; ++b) {
    const Tensor e = activation_quant_error(x, QuantParams::per_tensor(b, range));
    double m = 0.0;
    for (float v : e.values()) m += std::fabs(v);
    m /= static_cast<double>(e.size());
    EXPECT_LE(m, prev) << b << " bits";
    prev = m;
  }
}

TEST(QuantizerProperty, SmallerVarianceGivesSmallerMinMaxError) {
  int wins = 0;
  const int trials = 100;
  for (int seed = 0; seed < trials; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::normal_distribution<double> n(0.0, 1.0);
    auto err = [&](double sigma) {
      Tensor x({2000});
      for (auto &v : x.values()) v = static_cast<float>(sigma * n(rng));
      const QuantParams p = QuantParams::per_tensor(4, {std::min(0.0, static_cast<double>(min_value(x))),
                                                        std::max(0.0, static_cast<double>(max_value(x)))});
      double m = 0.0;
      for (float v : activation_quant_error(x, p).values()) m += std::fabs(v);
      return m / static_cast<double>(x.size());
    };
    if (err(0.3) <= err(1.0)) ++wins;
  }
  EXPECT_GE(wins, 95);
}

TEST(ConvProperty, Linearity) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = oracle::random_tensor({3, 6, 6}, rng);
    const Tensor b = oracle::random_tensor({3, 6, 6}, rng);
    const Tensor w = oracle::random_tensor({2, 3, 3, 3}, rng);
    const float alpha = 0.7f, beta = -1.3f;
    const Tensor lhs = conv2d(add(scale(a, alpha), scale(b, beta)), w, 1);
    const Tensor rhs = add(scale(conv2d(a, w, 1), alpha), scale(conv2d(b, w, 1), beta));
    EXPECT_LE(oracle::relative_diff(lhs, rhs), 1e-5);
  }
}

TEST(ConvProperty, ExactOnIntegerInputs) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> d(-8, 8);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x({2, 5, 5}), w({3, 2, 3, 3});
    for (auto &v : x.values()) v = static_cast<float>(d(rng));
    for (auto &v : w.values()) v = static_cast<float>(d(rng));
    EXPECT_EQ(conv2d(x, w, 1), oracle::naive_conv(x, w, 1));
  }
}

TEST(ConvProperty, ChannelNormMapSquaresSumToFrobenius) {
  std::mt19937_64 rng(14);
  const Tensor x = oracle::random_tensor({5, 7, 9}, rng);
  const Tensor m = channel_norm_map(x);
  double sq = 0.0;
  for (float v : m.values()) sq += static_cast<double>(v) * v;
  const double f = frobenius_norm(x);
  EXPECT_NEAR(sq, f * f, 1e-6 * f * f);
}

TEST(PolicyProperty, TauMonotonicityPointwise) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> tau(0.0, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Tensor> maps;
    for (int i = 0; i < 3; ++i) maps.push_back(oracle::random_tensor({4, 5}, rng, 0.0, 1.0));
    double t1 = tau(rng), t2 = tau(rng);
    if (t1 > t2) std::swap(t1, t2);
    const IndexMap a = select_bitwidths(maps, t1), b = select_bitwidths(maps, t2);
    for (std::size_t i = 0; i < a.values().size(); ++i) ASSERT_GE(a.values()[i], b.values()[i]);
  }
}

TEST(BopsProperty, CountsNeverDecreaseWithBits) {
  const ConvShape s = conv_shape(Tensor({4, 3, 3, 3}), 8, 8, 1);
  for (int bw = 1; bw < 16; ++bw) {
    for (int ba = 0; ba < 16; ++ba) {
      EXPECT_LE(conv_bops(s, bw, ba), conv_bops(s, bw + 1, ba));
      EXPECT_LE(conv_bops(s, bw, ba), conv_bops(s, bw, ba + 1));
    }
  }
}

}  // namespace
}  // namespace resq
