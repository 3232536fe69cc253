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

#ifndef RESQ_HARNESS_HPP_
#define RESQ_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "resq/calibration.hpp"
#include "resq/engine.hpp"

namespace resq {

// ---------------------------------------------------------------------------
// Synthetic clips

enum class Pattern { TranslatingSquare, TranslatingTexture, RotatingBars, WhiteNoise };

std::string to_string(Pattern p);
Pattern parse_pattern(const std::string &s);

struct SyntheticClipSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;
  std::size_t length = 8;
  Pattern pattern = Pattern::TranslatingSquare;
  double motion = 1.0;  // pixels per frame; 0 gives a static scene
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticClip {
  std::vector<Tensor> frames;        // (C, H, W), noise included
  std::vector<Tensor> clean_frames;  // same, before noise
  std::vector<Tensor> motion_masks;  // (H, W) in {0, 1}: clean pixel changed since previous frame
};

SyntheticClip generate_clip(const SyntheticClipSpec &spec);

/// 1 where any channel of `a` and `b` differs at the pixel.
Tensor change_mask(const Tensor &a, const Tensor &b);

// ---------------------------------------------------------------------------
// Toy models

struct ToyModelSpec {
  std::size_t depth = 3;
  std::size_t in_channels = 3;
  std::size_t channels = 8;
  std::size_t kernel = 3;
  std::uint64_t seed = 0;
  bool identity = false;  // 1x1 identity kernels instead of random weights
};

/// He-scaled Gaussian weights, ReLU between layers, same-padding.
ModelSpec build_toy_model(const ToyModelSpec &spec);

// ---------------------------------------------------------------------------
// Experiments

struct VarianceRow {
  std::size_t layer = 0;
  double frame_variance = 0.0;
  double residual_variance = 0.0;
  double frame_quant_error = 0.0;     // mean |x - q(x)| at min-max range
  double residual_quant_error = 0.0;  // same for residuals
};

/*
 * Per-layer statistics of the full-precision model's layer inputs: frames
 * versus residuals against the period keyframe. Quantization errors use a
 * per-tensor min-max quantizer fitted to each batch at `bits`.
 */
std::vector<VarianceRow> experiment_variance(const ModelSpec &model, std::span<const Clip> clips, std::size_t period,
                                             int bits);
std::string variance_csv(std::span<const VarianceRow> rows);

struct ClipSetSpec {
  std::size_t count = 2;
  SyntheticClipSpec clip;
};

std::vector<SyntheticClip> generate_clip_set(const ClipSetSpec &spec, std::uint64_t seed);
std::vector<Clip> frames_of(std::span<const SyntheticClip> clips);

/*
 * Sweep description; also the JSON experiment file accepted by the CLI.
 * Seeds drive the model, calibration clips and evaluation clips.
 */
struct ExperimentSpec {
  std::vector<std::uint64_t> seeds{0};
  ToyModelSpec model;
  std::optional<std::filesystem::path> model_path;
  ClipSetSpec calibration_clips;
  ClipSetSpec eval_clips;
  std::vector<std::size_t> periods{2, 4, 6, 8};
  std::vector<std::string> precisions{"W8A8|W8A4", "W8A8", "W8A4"};
  std::vector<RunMode> modes{RunMode::Frame, RunMode::ResqPairwise};
  CalibrationConfig calibration{16, 20, 3, Granularity::PerTensor, false};
  PolicyConfig policy;
};

ExperimentSpec experiment_from_json(const nlohmann::json &doc);
nlohmann::json experiment_to_json(const ExperimentSpec &spec);

struct TradeoffRow {
  std::uint64_t seed = 0;
  RunMode mode = RunMode::Frame;
  std::string precision;
  std::size_t period = 0;       // 0 for frame mode (independent of T)
  double amortized_gbops = 0.0;  // conv + policy
  double amortized_conv_gbops = 0.0;
  double mse = 0.0;
  std::vector<double> mse_by_distance;  // index = frames since keyframe
};

/// One row per (seed, precision, mode, T); frame mode once per (seed, precision).
std::vector<TradeoffRow> experiment_tradeoff(const ExperimentSpec &spec);
std::string tradeoff_csv(std::span<const TradeoffRow> rows);
std::string stability_csv(std::span<const TradeoffRow> rows);

struct PolicyMapSummaryRow {
  std::uint64_t seed = 0;
  std::size_t distance = 0;
  std::size_t layer = 0;
  double mean_bits = 0.0;
  double mean_bits_moving = 0.0;  // pixels changed since the keyframe
  double mean_bits_static = 0.0;
  std::size_t moving_pixels = 0;
};

struct PolicyMapResult {
  std::vector<PolicyMapSummaryRow> rows;
  std::size_t maps_written = 0;
};

/*
 * Dynamic runs on each seed's evaluation clips, one pool precision (the
 * first pool entry of spec.precisions). Writes per-frame, per-layer PGM
 * maps to out_dir when given.
 */
PolicyMapResult experiment_policy_map(const ExperimentSpec &spec, const std::optional<std::filesystem::path> &out_dir);
std::string policy_summary_csv(std::span<const PolicyMapSummaryRow> rows);

// ---------------------------------------------------------------------------
// Output helpers

/// Binary PGM (P5); pixel value = selected bit-width, maxval = max pool bits.
void write_policy_pgm(const std::filesystem::path &path, const IndexMap &index, const QuantizerPool &pool);
/// Reads a P5 map back as a float tensor (H, W).
Tensor read_pgm(const std::filesystem::path &path);

/// Per-frame, per-layer rows: frame_index,is_keyframe,layer,bops,output_mse_vs_fp32.
std::string run_report_csv(const SequenceResult &run, const std::vector<std::vector<Tensor>> &fp_layer_outputs,
                           bool giga);

std::vector<std::vector<Tensor>> full_precision_layer_outputs(const ModelSpec &model, std::span<const Tensor> clip);

double spearman_correlation(std::span<const double> x, std::span<const double> y);

/// Worker count for sweeps: hardware threads, capped by RESQ_THREADS.
std::size_t sweep_threads();

void write_text(const std::filesystem::path &path, const std::string &text);

}  // namespace resq

#endif  // RESQ_HARNESS_HPP_
