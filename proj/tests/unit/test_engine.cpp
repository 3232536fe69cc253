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
#include "resq/engine.hpp"
#include "resq/errors.hpp"
#include "resq/harness.hpp"

namespace resq {
namespace {

SyntheticClipSpec small_clip(std::uint64_t seed, Pattern pattern = Pattern::TranslatingTexture, double motion = 1.0) {
  SyntheticClipSpec s;
  s.height = 12;
  s.width = 12;
  s.channels = 2;
  s.length = 8;
  s.pattern = pattern;
  s.motion = motion;
  s.seed = seed;
  return s;
}

ModelSpec quantized_model(std::uint64_t seed, const std::string &precision, std::size_t period = 3,
                          Pattern pattern = Pattern::TranslatingTexture) {
  const ModelSpec m = build_toy_model({2, 2, 4, 3, seed, false});
  std::vector<Clip> clips{generate_clip(small_clip(seed + 100, pattern)).frames};
  CalibrationConfig cfg;
  cfg.samples = 4;
  cfg.grid = 8;
  cfg.period = period;
  return calibrate_model(m, clips, parse_precision(precision), cfg);
}

TEST(Engine, FullPrecisionResidualModesEqualFrameMode) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelSpec m = build_toy_model({3, 2, 4, 3, seed, false});
    const auto clip = generate_clip(small_clip(seed)).frames;
    const auto frame = run_sequence(m, clip, {3}, RunMode::Frame).outputs();
    for (RunMode mode : {RunMode::ResqPairwise, RunMode::ResqRecurrent}) {
      const auto out = run_sequence(m, clip, {3}, mode).outputs();
      for (std::size_t t = 0; t < clip.size(); ++t) EXPECT_LE(oracle::relative_diff(out[t], frame[t]), 1e-5);
    }
  }
}

TEST(Engine, FrameForwardMatchesReferenceOracle) {
  const ModelSpec q = quantized_model(1, "W8A8");
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_tensor({2, 12, 12}, rng, 0.0, 1.0);
  EXPECT_LE(oracle::relative_diff(frame_forward(q, x).output, oracle::forward(q, x)), 1e-6);
  EXPECT_EQ(frame_forward(q.full_precision(), x).output, frame_forward(build_toy_model({2, 2, 4, 3, 1, false}), x).output);
  EXPECT_EQ(max_abs(frame_forward(q, Tensor({2, 12, 12})).output), 0.0);
}

TEST(Engine, ResidualSequenceMatchesReferenceOracle) {
  const ModelSpec q = quantized_model(3, "W8A8|W8A4");
  const auto clip = generate_clip(small_clip(4)).frames;
  for (bool recurrent : {false, true}) {
    const auto out = run_sequence(q, clip, {3}, recurrent ? RunMode::ResqRecurrent : RunMode::ResqPairwise).outputs();
    const auto ref = oracle::residual_sequence(q, clip, 3, recurrent);
    for (std::size_t t = 0; t < clip.size(); ++t) EXPECT_LE(oracle::relative_diff(out[t], ref[t]), 1e-6) << t;
  }
}

TEST(Engine, KeyframeStateHoldsReferences) {
  const ModelSpec q = quantized_model(5, "W8A8|W8A4");
  const auto clip = generate_clip(small_clip(6)).frames;
  ResidualState state;
  keyframe_forward(q, clip[0], state);
  ASSERT_EQ(state.reference_input.size(), q.layers.size());
  const auto shapes = q.activation_shapes(clip[0].shape());
  for (std::size_t l = 0; l < q.layers.size(); ++l) EXPECT_EQ(state.reference_output[l].shape(), shapes[l]);
  const Layer &l0 = q.layers[0];
  EXPECT_EQ(state.reference_output[0],
            conv2d(fake_quantize(clip[0], l0.quant.keyframe_act), fake_quantize(l0.weights, l0.quant.keyframe_weight), l0.padding));
  const ForwardResult r = residual_forward(q, clip[0], state);
  EXPECT_EQ(max_abs(r.residuals[0]), 0.0);
}

TEST(Engine, StaticFrameReproducesKeyframeOutputExactly) {
  const ModelSpec q = quantized_model(7, "W8A8|W4A4");
  const auto frame = generate_clip(small_clip(8)).frames[0];
  const std::vector<Tensor> clip(5, frame);
  for (RunMode mode : {RunMode::ResqPairwise, RunMode::ResqRecurrent}) {
    const auto out = run_sequence(q, clip, {5}, mode).outputs();
    for (const auto &y : out) EXPECT_EQ(y, out[0]);
  }
}

TEST(Engine, HandEvaluatedResidualStep) {
  ModelSpec m;
  m.layers.push_back({Tensor({1, 1, 1, 1}, 2.0f), 0, Nonlinearity::None, {}});
  m.layers[0].quant.residual_act = QuantParams::per_tensor(4, {-0.25, 0.25});
  ResidualState state;
  keyframe_forward(m, Tensor({1, 1, 1}, 1.0f), state);
  const Tensor y = residual_forward(m, Tensor({1, 1, 1}, 1.2f), state).output;
  // delta = 1.2f - 1.0f; s = 0.5 / 15; round(delta / s) = 6
  const float dq = static_cast<float>(6.0 * (0.5 / 15.0));
  const float expected = static_cast<float>(static_cast<double>(dq) * 2.0) + 2.0f;
  EXPECT_EQ(y[0], expected);
}

TEST(Engine, ResidualBeforeKeyframeIsSequencingError) {
  const ModelSpec q = quantized_model(9, "W8A8|W8A4");
  ResidualState state;
  EXPECT_THROW(residual_forward(q, Tensor({2, 12, 12}), state), SequencingError);
  EXPECT_THROW(dynamic_residual_forward(q, Tensor({2, 12, 12}), state, {}), SequencingError);
}

TEST(Engine, PeriodOneCoincidesWithFrameMode) {
  const ModelSpec q = quantized_model(10, "W8A8|W8A4");
  const auto clip = generate_clip(small_clip(11)).frames;
  const auto frame = run_sequence(q, clip, {1}, RunMode::Frame);
  const auto resq = run_sequence(q, clip, {1}, RunMode::ResqPairwise);
  EXPECT_EQ(frame.outputs(), resq.outputs());
  EXPECT_EQ(frame.report.total(), resq.report.total());
}

TEST(Engine, ScheduleDrivesKeyframeCosts) {
  const ModelSpec q = quantized_model(12, "W8A8|W8A4", 4);
  const auto clip = generate_clip(small_clip(13)).frames;
  const auto run = run_sequence(q, clip, {4}, RunMode::ResqPairwise);
  EXPECT_EQ(run.report.keyframes, 2u);
  for (const auto &f : run.report.frames) {
    EXPECT_EQ(f.is_keyframe, f.frame % 4 == 0);
    if (!f.is_keyframe) {
      EXPECT_EQ(f.conv_bops * 2, run.report.frames[0].conv_bops);
    }
  }
  const auto frame_mode = run_sequence(q, clip, {4}, RunMode::Frame);
  EXPECT_LT(run.report.amortized_total, frame_mode.report.amortized_total);
  EXPECT_GT(run.report.amortized_total, static_cast<double>(run.report.frames[1].conv_bops));
}

TEST(Engine, PairwiseOutputDependsOnlyOnKeyframeAndCurrentFrame) {
  const ModelSpec q = quantized_model(14, "W8A8|W8A4", 8);
  const auto clip = generate_clip(small_clip(15)).frames;
  const auto full = run_sequence(q, clip, {8}, RunMode::ResqPairwise).outputs();
  for (std::size_t t = 1; t < clip.size(); ++t) {
    const std::vector<Tensor> pair{clip[0], clip[t]};
    EXPECT_EQ(run_sequence(q, pair, {8}, RunMode::ResqPairwise).outputs()[1], full[t]) << t;
  }
}

TEST(Engine, ZeroBitResidualReusesKeyframeOutput) {
  ModelSpec q = quantized_model(16, "W8A8|W8A4");
  for (auto &l : q.layers) l.quant.residual_act = QuantParams::zero_bit();
  const auto clip = generate_clip(small_clip(17)).frames;
  const auto run = run_sequence(q, clip, {4}, RunMode::ResqPairwise);
  for (std::size_t t = 1; t < 4; ++t) {
    EXPECT_EQ(run.frames[t].output, run.frames[0].output);
    EXPECT_EQ(run.report.frames[t].conv_bops, 0u);
  }
}

TEST(DynamicEngine, NegativeTauEqualsStaticPoolMax) {
  const ModelSpec q = quantized_model(18, "W8A8|W8A{0,4,8}");
  const auto clip = generate_clip(small_clip(19)).frames;
  const auto dyn = run_sequence(q, clip, {4}, RunMode::ResqDynamic, {-1.0});
  const auto stat = run_sequence(q, clip, {4}, RunMode::ResqPairwise);
  EXPECT_EQ(dyn.outputs(), stat.outputs());
  EXPECT_EQ(dyn.report.total_conv, stat.report.total_conv);
}

TEST(DynamicEngine, StaticClipSelectsLowestEntryAndSkipsConv) {
  const ModelSpec q = quantized_model(20, "W8A8|W8A{0,4,8}");
  const std::vector<Tensor> clip(4, generate_clip(small_clip(21)).frames[0]);
  const auto run = run_sequence(q, clip, {4}, RunMode::ResqDynamic);
  for (std::size_t t = 1; t < 4; ++t) {
    EXPECT_EQ(run.frames[t].output, run.frames[0].output);
    EXPECT_EQ(run.report.frames[t].conv_bops, 0u);
    EXPECT_GT(run.report.frames[t].policy_bops, 0u);
    for (const auto &idx : run.frames[t].index_maps) EXPECT_EQ(idx, IndexMap(12, 12, 1));
  }
}

TEST(DynamicEngine, ConvBopsNeverExceedStaticPoolMax) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const ModelSpec q = quantized_model(22 + seed, "W8A8|W8A{0,4,8}");
    const auto clip = generate_clip(small_clip(30 + seed, Pattern::TranslatingSquare, 2.0)).frames;
    const auto dyn = run_sequence(q, clip, {4}, RunMode::ResqDynamic);
    const auto stat = run_sequence(q, clip, {4}, RunMode::ResqPairwise);
    for (std::size_t t = 0; t < clip.size(); ++t) EXPECT_LE(dyn.report.frames[t].conv_bops, stat.report.frames[t].conv_bops);
  }
}

TEST(DynamicEngine, MovingSquareGetsHighestPrecision) {
  // calibrated on the same kind of motion so the residual ranges fit
  const ModelSpec q = quantized_model(40, "W8A8|W8A{0,4,8}", 4, Pattern::TranslatingSquare);
  const SyntheticClip clip = generate_clip(small_clip(41, Pattern::TranslatingSquare, 1.0));
  const auto run = run_sequence(q, clip.frames, {4}, RunMode::ResqDynamic);
  std::size_t moving = 0, moving_high = 0, still = 0, still_low = 0;
  for (std::size_t t = 1; t < 4; ++t) {
    const Tensor mask = change_mask(clip.clean_frames[t], clip.clean_frames[0]);
    const IndexMap &idx = run.frames[t].index_maps[0];
    for (std::size_t p = 0; p < mask.size(); ++p) {
      if (mask[p] > 0.5f) {
        ++moving;
        moving_high += idx.values()[p] == 3;
      } else {
        ++still;
        still_low += idx.values()[p] == 1;
      }
    }
  }
  ASSERT_GT(moving, 0u);
  EXPECT_GE(static_cast<double>(moving_high), 0.9 * static_cast<double>(moving));
  EXPECT_EQ(still_low, still);
}

TEST(DynamicEngine, RequiresPoolAndSamePadding) {
  const ModelSpec q = quantized_model(42, "W8A8|W8A4");
  const auto clip = generate_clip(small_clip(43)).frames;
  EXPECT_THROW(run_sequence(q, clip, {4}, RunMode::ResqDynamic), InvalidArgument);
  ModelSpec valid;
  valid.layers.push_back({Tensor({1, 1, 3, 3}, 0.1f), 0, Nonlinearity::None, {}});
  valid.layers[0].quant.residual_act = QuantizerPool({QuantParams::zero_bit(), QuantParams::per_tensor(8, {-1, 1})});
  const std::vector<Tensor> frames(2, Tensor({1, 5, 5}, 0.5f));
  EXPECT_THROW(run_sequence(valid, frames, {2}, RunMode::ResqDynamic), DimensionError);
}

TEST(Session, StreamingMatchesBatchRun) {
  const ModelSpec q = quantized_model(44, "W8A8|W8A{0,4,8}");
  const auto clip = generate_clip(small_clip(45)).frames;
  const auto batch = run_sequence(q, clip, {3}, RunMode::ResqDynamic);
  Session s(q, {3}, RunMode::ResqDynamic);
  for (std::size_t t = 0; t < clip.size(); ++t) EXPECT_EQ(s.push(clip[t]).output, batch.frames[t].output);
  EXPECT_EQ(s.frames_seen(), clip.size());
  EXPECT_THROW(Session(q, {0}, RunMode::ResqPairwise), InvalidArgument);
}

TEST(RunMode, ParseAndPrint) {
  for (RunMode m : {RunMode::Frame, RunMode::ResqPairwise, RunMode::ResqRecurrent, RunMode::ResqDynamic}) {
    EXPECT_EQ(parse_run_mode(to_string(m)), m);
  }
  EXPECT_EQ(parse_run_mode("resq"), RunMode::ResqPairwise);
  EXPECT_THROW(parse_run_mode("fast"), ParseError);
}

}  // namespace
}  // namespace resq
