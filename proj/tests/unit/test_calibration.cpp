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

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "resq/calibration.hpp"
#include "resq/errors.hpp"
#include "resq/harness.hpp"

namespace resq {
namespace {

ModelSpec identity_model() { return build_toy_model({1, 1, 1, 1, 0, true}); }

TEST(Precision, ParsesNotation) {
  const PrecisionConfig a = parse_precision("W8A8|W4A4");
  EXPECT_EQ(a.keyframe_weight_bits, 8);
  EXPECT_EQ(a.keyframe_act_bits, 8);
  EXPECT_EQ(a.residual_weight_bits, 4);
  EXPECT_EQ(a.residual_act_bits, std::vector<int>{4});
  EXPECT_FALSE(a.has_pool());

  const PrecisionConfig pool = parse_precision("W8A8|W8A{0,4,8}");
  EXPECT_TRUE(pool.has_pool());
  EXPECT_EQ(pool.residual_act_bits, (std::vector<int>{0, 4, 8}));
  EXPECT_EQ(pool.to_string(), "W8A8|W8A{0,4,8}");

  const PrecisionConfig bare = parse_precision("W8A4");
  EXPECT_EQ(bare.residual_weight_bits, 8);
  EXPECT_EQ(bare.residual_act_bits, std::vector<int>{4});

  for (const char *bad : {"W8A8|W8A{8,4}", "W0A8", "W8A8|W8A0", "8/8", "W8A8|", "W8A8|W8A{4}x"}) {
    EXPECT_THROW(parse_precision(bad), ParseError) << bad;
  }
  EXPECT_EQ(parse_bit_list("0, 4,8"), (std::vector<int>{0, 4, 8}));
}

TEST(WeightRange, MinMax) {
  const Tensor w({1, 1, 1, 2}, std::vector<float>{-1, 1});
  EXPECT_EQ(weight_minmax_range(w, Granularity::PerTensor).front(), (Range{-1, 1}));
  const Tensor pos({1, 1, 1, 2}, std::vector<float>{0.5f, 2.0f});
  EXPECT_EQ(weight_minmax_range(pos, Granularity::PerTensor).front(), (Range{0.0, 2.0}));
  const Tensor two({2, 1, 1, 2}, std::vector<float>{-0.5f, 1.0f, 2.0f, -1.0f});
  const QuantParams p = weight_minmax_params(two, Granularity::PerChannel, 8);
  EXPECT_DOUBLE_EQ(p.scale(1) / p.scale(0), 2.0);
  const QuantParams zero = weight_minmax_params(Tensor({1, 1, 1, 2}), Granularity::PerTensor, 8);
  EXPECT_EQ(zero.scale(), minimal_scale(8));
}

TEST(CollectActivations, DegenerateScheduleAndStaticScene) {
  const ModelSpec m = identity_model();
  const std::vector<Clip> single{Clip{Tensor({1, 2, 2}, 0.3f), Tensor({1, 2, 2}, 0.7f)}};
  CalibrationConfig cfg;
  cfg.period = 1;
  EXPECT_THROW(collect_activations(m, 0, single, ActivationSource::Residual, cfg), InvalidArgument);

  cfg.period = 3;
  const std::vector<Clip> still{Clip(4, Tensor({1, 2, 2}, 0.3f))};
  const Tensor r = collect_activations(m, 0, still, ActivationSource::Residual, cfg);
  EXPECT_EQ(r.extent(0), 2u);
  EXPECT_EQ(max_abs(r), 0.0);
}

TEST(CollectActivations, TwoFrameResidualIsPixelDifference) {
  ModelSpec m = build_toy_model({2, 1, 1, 1, 0, true});
  m.layers[0].quant.keyframe_act = QuantParams::per_tensor(4, {-1, 1});
  m.layers[0].quant.keyframe_weight = QuantParams::per_tensor(8, {-1, 1});
  std::mt19937_64 rng(1);
  const Tensor a = oracle::random_tensor({1, 3, 3}, rng, 0, 1), b = oracle::random_tensor({1, 3, 3}, rng, 0, 1);
  const std::vector<Clip> clips{Clip{a, b}};
  CalibrationConfig cfg;
  cfg.period = 2;
  EXPECT_EQ(collect_activations(m, 0, clips, ActivationSource::Residual, cfg).slice(0), sub(b, a));
  EXPECT_EQ(collect_activations(m, 0, clips, ActivationSource::Frame, cfg).slice(0), a);
}

TEST(CollectActivations, CapsAtSampleCount) {
  const ModelSpec m = identity_model();
  const std::vector<Clip> clips(3, Clip(6, Tensor({1, 2, 2}, 0.1f)));
  CalibrationConfig cfg;
  cfg.period = 2;
  cfg.samples = 5;
  EXPECT_EQ(collect_activations(m, 0, clips, ActivationSource::Residual, cfg).extent(0), 5u);
  EXPECT_EQ(collect_activations(m, 0, clips, ActivationSource::Frame, cfg).extent(0), 5u);
}

TEST(SearchGrid, IncludesZeroSideAndExtremes) {
  const Tensor x({1, 1, 1, 3}, std::vector<float>{0.5f, 1.0f, 2.0f});
  const auto g = search_grid(x, 5);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 2.0);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
  EXPECT_THROW(search_grid(x, 1), InvalidArgument);
}

TEST(LineSearch, ZeroBatchPicksSmallestMagnitude) {
  const Tensor x({2, 1, 2, 2});
  const Tensor w({1, 1, 1, 1}, 1.0f);
  const LineSearchResult r = line_search_activation_range(x, w, QuantParams::per_tensor(8, {-1, 1}), 0, 4, 20);
  EXPECT_EQ(r.objective, 0.0);
  EXPECT_EQ(r.params.scale(), minimal_scale(4));
}

TEST(LineSearch, MatchesExhaustiveGridOnUniformBatch) {
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_tensor({8, 1, 4, 4}, rng, -1, 1);
  const Tensor w({1, 1, 1, 1}, 1.0f);
  const QuantParams pw = QuantParams::per_tensor(8, {-1, 1});
  const LineSearchResult r = line_search_activation_range(x, w, pw, 0, 8, 20);
  EXPECT_EQ(r.objective, oracle::exhaustive_line_search(x, w, pw, 0, 8, 20));
}

TEST(LineSearch, ClipsAnOutlierWhenThatLowersTheObjective) {
  std::mt19937_64 rng(4);
  Tensor x = oracle::random_tensor({1, 1, 1, 1001}, rng, -1, 1);
  x[1000] = 4.0f;
  const Tensor w({1, 1, 1, 1}, 1.0f);
  const QuantParams pw = QuantParams::per_tensor(8, {-1, 1});
  const LineSearchResult r = line_search_activation_range(x, w, pw, 0, 3, 20);
  EXPECT_LT(std::max(r.range.max, -r.range.min), 4.0);
  EXPECT_LT(r.objective, range_objective(x, w, fake_quantize(w, pw), 0, QuantParams::per_tensor(3, {-1, 4})));
  EXPECT_EQ(r.objective, oracle::exhaustive_line_search(x, w, pw, 0, 3, 20));
}

TEST(LineSearch, KeepsAnOutlierWhoseClippingCostsMore) {
  // a single large value among tiny ones: its squared clipping error
  // outweighs the rounding error of the rest, so the full range wins
  Tensor x({1, 1, 1, 1001});
  for (std::size_t i = 0; i < 1000; ++i) x[i] = i % 2 ? 0.1f : -0.1f;
  x[1000] = 10.0f;
  const Tensor w({1, 1, 1, 1}, 1.0f);
  const QuantParams pw = QuantParams::per_tensor(8, {-1, 1});
  const LineSearchResult r = line_search_activation_range(x, w, pw, 0, 4, 20);
  EXPECT_EQ(r.range.max, 10.0);
  EXPECT_EQ(r.objective, oracle::exhaustive_line_search(x, w, pw, 0, 4, 20));
}

TEST(LineSearch, NeverWorseThanMinMax) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = oracle::random_tensor({3, 2, 5, 5}, rng, -0.3, 1.5);
    const Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
    const QuantParams pw = weight_minmax_params(w, Granularity::PerTensor, 4);
    const LineSearchResult r = line_search_activation_range(x, w, pw, 1, 4, 20);
    const QuantParams mm =
        QuantParams::per_tensor(4, {std::min(0.0, double(min_value(x))), std::max(0.0, double(max_value(x)))});
    EXPECT_LE(r.objective, range_objective(x, w, fake_quantize(w, pw), 1, mm));
  }
}

TEST(CalibrateModel, ConstantClipsGiveMinimalResidualScales) {
  const ModelSpec m = identity_model();
  const std::vector<Clip> clips{Clip(6, Tensor({1, 4, 4}, 0.5f))};
  CalibrationConfig cfg;
  cfg.samples = 8;
  const ModelSpec q = calibrate_model(m, clips, parse_precision("W8A8|W4A4"), cfg);
  const auto &quant = q.layers[0].quant;
  EXPECT_EQ(quant.static_residual_act().scale(), minimal_scale(4));
  EXPECT_GT(quant.keyframe_act.ranges().front().max, 0.0);
  EXPECT_LE(quant.keyframe_act.ranges().front().max, 0.5);
  EXPECT_EQ(quant.keyframe_weight.bit_width(), 8);
  EXPECT_EQ(quant.residual_weight.bit_width(), 4);
}

TEST(CalibrateModel, DeterministicAndFillsPools) {
  const ModelSpec m = build_toy_model({2, 2, 3, 3, 5, false});
  SyntheticClipSpec s;
  s.height = s.width = 10;
  s.channels = 2;
  s.length = 6;
  s.pattern = Pattern::TranslatingTexture;
  const std::vector<Clip> clips{generate_clip(s).frames};
  CalibrationConfig cfg;
  cfg.samples = 4;
  cfg.grid = 6;
  const ModelSpec a = calibrate_model(m, clips, parse_precision("W8A8|W8A{0,4,8}"), cfg);
  const ModelSpec b = calibrate_model(a, clips, parse_precision("W8A8|W8A{0,4,8}"), cfg);
  EXPECT_EQ(a, b);
  for (const auto &l : a.layers) {
    ASSERT_TRUE(l.quant.has_pool());
    EXPECT_TRUE(l.quant.pool().entry(0).is_zero_bit());
    EXPECT_EQ(l.quant.pool().bit_widths(), (std::vector<int>{0, 4, 8}));
  }
}

TEST(CalibrateModel, FrameOnlyMirrorsKeyframeSlots) {
  const ModelSpec m = build_toy_model({2, 1, 2, 3, 6, false});
  SyntheticClipSpec s;
  s.height = s.width = 8;
  s.channels = 1;
  s.length = 3;
  const std::vector<Clip> clips{generate_clip(s).frames};
  CalibrationConfig cfg;
  cfg.samples = 3;
  cfg.grid = 5;
  cfg.frame_only = true;
  const ModelSpec q = calibrate_model(m, clips, parse_precision("W8A4"), cfg);
  for (const auto &l : q.layers) {
    EXPECT_EQ(l.quant.static_residual_act(), l.quant.keyframe_act);
    EXPECT_EQ(l.quant.residual_weight, l.quant.keyframe_weight);
    EXPECT_EQ(l.quant.keyframe_act.bit_width(), 4);
  }
}

}  // namespace
}  // namespace resq
