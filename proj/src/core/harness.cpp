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

#include "resq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "resq/errors.hpp"

namespace resq {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::TranslatingSquare:
      return "translating-square";
    case Pattern::TranslatingTexture:
      return "translating-texture";
    case Pattern::RotatingBars:
      return "rotating-bars";
    case Pattern::WhiteNoise:
      return "white-noise";
  }
  return "unknown";
}

Pattern parse_pattern(const std::string &s) {
  if (s == "translating-square") return Pattern::TranslatingSquare;
  if (s == "translating-texture") return Pattern::TranslatingTexture;
  if (s == "rotating-bars") return Pattern::RotatingBars;
  if (s == "white-noise") return Pattern::WhiteNoise;
  throw ParseError("unknown pattern '" + s + "'");
}

// ---------------------------------------------------------------------------
// clips

Tensor change_mask(const Tensor &a, const Tensor &b) {
  require_same_shape(a, b, "change_mask");
  if (a.rank() != 3) throw DimensionError("change_mask expects (C, H, W)");
  const std::size_t c = a.extent(0), h = a.extent(1), w = a.extent(2);
  Tensor mask({h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (a.at(ch, y, x) != b.at(ch, y, x)) mask[y * w + x] = 1.0f;
      }
    }
  }
  return mask;
}

namespace {

using Renderer = std::function<Tensor(std::size_t)>;

Renderer square_renderer(const SyntheticClipSpec &s, std::mt19937_64 &rng) {
  const std::size_t side = std::max<std::size_t>(2, std::min(s.height, s.width) / 4);
  if (side > s.height) throw InvalidArgument("clip too small for a square");
  std::uniform_int_distribution<std::size_t> px(0, s.width - 1), py(0, s.height - side);
  const std::size_t x0 = px(rng), y0 = py(rng);
  return [=](std::size_t t) {
    Tensor f({s.channels, s.height, s.width});
    const auto shift = static_cast<std::int64_t>(std::llround(s.motion * static_cast<double>(t)));
    const auto w = static_cast<std::int64_t>(s.width);
    for (std::size_t c = 0; c < s.channels; ++c) {
      const float bg = 0.2f + 0.05f * static_cast<float>(c % 4);
      const float fg = 0.8f - 0.05f * static_cast<float>(c % 4);
      for (std::size_t y = 0; y < s.height; ++y) {
        for (std::size_t x = 0; x < s.width; ++x) f.at(c, y, x) = bg;
      }
      for (std::size_t i = 0; i < side; ++i) {
        const auto col = static_cast<std::size_t>((((static_cast<std::int64_t>(x0 + i) + shift) % w) + w) % w);
        for (std::size_t y = y0; y < y0 + side; ++y) f.at(c, y, col) = fg;
      }
    }
    return f;
  };
}

Renderer texture_renderer(const SyntheticClipSpec &s, std::mt19937_64 &rng) {
  // sum of low-frequency plane waves, periodic in W so translation wraps seamlessly
  struct Wave {
    double kx, ky;
    std::vector<double> phase;
  };
  constexpr int kWaves = 4;
  std::uniform_int_distribution<int> fx(1, 2), fy(0, 1);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
  std::vector<Wave> waves;
  for (int k = 0; k < kWaves; ++k) {
    Wave wv{static_cast<double>(fx(rng)), static_cast<double>(fy(rng)), {}};
    for (std::size_t c = 0; c < s.channels; ++c) wv.phase.push_back(ph(rng));
    waves.push_back(std::move(wv));
  }
  return [=](std::size_t t) {
    Tensor f({s.channels, s.height, s.width});
    const double offset = s.motion * static_cast<double>(t);
    for (std::size_t c = 0; c < s.channels; ++c) {
      for (std::size_t y = 0; y < s.height; ++y) {
        for (std::size_t x = 0; x < s.width; ++x) {
          double v = 0.0;
          for (const auto &wv : waves) {
            v += std::sin(2.0 * std::numbers::pi *
                              (wv.kx * (static_cast<double>(x) - offset) / static_cast<double>(s.width) +
                               wv.ky * static_cast<double>(y) / static_cast<double>(s.height)) +
                          wv.phase[c]);
          }
          f.at(c, y, x) = static_cast<float>(0.5 + 0.5 * v / kWaves);
        }
      }
    }
    return f;
  };
}

Renderer bars_renderer(const SyntheticClipSpec &s, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  const double theta0 = angle(rng);
  const double radius = 0.5 * static_cast<double>(std::min(s.height, s.width));
  const double omega = s.motion / radius;  // rim speed = motion px/frame
  const double period = std::max(2.0, radius / 2.0);
  return [=](std::size_t t) {
    Tensor f({s.channels, s.height, s.width});
    const double th = theta0 + omega * static_cast<double>(t);
    const double cx = 0.5 * static_cast<double>(s.width - 1), cy = 0.5 * static_cast<double>(s.height - 1);
    for (std::size_t c = 0; c < s.channels; ++c) {
      for (std::size_t y = 0; y < s.height; ++y) {
        for (std::size_t x = 0; x < s.width; ++x) {
          const double u = (static_cast<double>(x) - cx) * std::cos(th) + (static_cast<double>(y) - cy) * std::sin(th);
          const double sgn = std::sin(2.0 * std::numbers::pi * u / period) >= 0.0 ? 1.0 : -1.0;
          f.at(c, y, x) = static_cast<float>(0.5 + (0.3 - 0.05 * static_cast<double>(c % 3)) * sgn);
        }
      }
    }
    return f;
  };
}

}  // namespace

SyntheticClip generate_clip(const SyntheticClipSpec &spec) {
  if (spec.height == 0 || spec.width == 0 || spec.channels == 0 || spec.length == 0) {
    throw InvalidArgument("clip extents must be positive");
  }
  if (spec.motion < 0.0 || spec.noise_sigma < 0.0) throw InvalidArgument("motion and noise must be non-negative");
  std::mt19937_64 rng(splitmix64(spec.seed));
  std::mt19937_64 noise_rng(splitmix64(spec.seed ^ 0x6e6f697365ull));
  std::normal_distribution<double> noise(0.0, 1.0);

  SyntheticClip clip;
  if (spec.pattern == Pattern::WhiteNoise) {
    std::normal_distribution<double> pix(0.5, 0.2);
    for (std::size_t t = 0; t < spec.length; ++t) {
      Tensor f({spec.channels, spec.height, spec.width});
      for (auto &v : f.values()) v = static_cast<float>(pix(rng));
      clip.clean_frames.push_back(std::move(f));
    }
  } else {
    Renderer render;
    switch (spec.pattern) {
      case Pattern::TranslatingSquare:
        render = square_renderer(spec, rng);
        break;
      case Pattern::TranslatingTexture:
        render = texture_renderer(spec, rng);
        break;
      default:
        render = bars_renderer(spec, rng);
        break;
    }
    for (std::size_t t = 0; t < spec.length; ++t) clip.clean_frames.push_back(render(t));
  }

  for (std::size_t t = 0; t < spec.length; ++t) {
    Tensor f = clip.clean_frames[t];
    if (spec.noise_sigma > 0.0) {
      for (auto &v : f.values()) v += static_cast<float>(spec.noise_sigma * noise(noise_rng));
    }
    clip.frames.push_back(std::move(f));
    clip.motion_masks.push_back(t == 0 ? Tensor({spec.height, spec.width})
                                       : change_mask(clip.clean_frames[t], clip.clean_frames[t - 1]));
  }
  return clip;
}

std::vector<SyntheticClip> generate_clip_set(const ClipSetSpec &spec, std::uint64_t seed) {
  std::vector<SyntheticClip> clips;
  for (std::size_t i = 0; i < spec.count; ++i) {
    SyntheticClipSpec s = spec.clip;
    s.seed = splitmix64(seed * 1000003ull + i);
    clips.push_back(generate_clip(s));
  }
  return clips;
}

std::vector<Clip> frames_of(std::span<const SyntheticClip> clips) {
  std::vector<Clip> out;
  for (const auto &c : clips) out.push_back(c.frames);
  return out;
}

// ---------------------------------------------------------------------------
// models

ModelSpec build_toy_model(const ToyModelSpec &spec) {
  if (spec.depth == 0 || spec.channels == 0 || spec.in_channels == 0) throw InvalidArgument("toy model extents must be positive");
  ModelSpec model;
  if (spec.identity) {
    for (std::size_t l = 0; l < spec.depth; ++l) {
      Tensor w({spec.in_channels, spec.in_channels, 1, 1});
      for (std::size_t c = 0; c < spec.in_channels; ++c) w[c * spec.in_channels + c] = 1.0f;
      model.layers.push_back({std::move(w), 0, Nonlinearity::None, {}});
    }
    return model;
  }
  if (spec.kernel % 2 == 0) throw InvalidArgument("toy models use odd kernels for same-padding");
  std::mt19937_64 rng(splitmix64(spec.seed ^ 0x6d6f64656cull));
  std::size_t cin = spec.in_channels;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(cin * spec.kernel * spec.kernel));
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor w({spec.channels, cin, spec.kernel, spec.kernel});
    for (auto &v : w.values()) v = static_cast<float>(dist(rng));
    const Nonlinearity nl = l + 1 < spec.depth ? Nonlinearity::Relu : Nonlinearity::None;
    model.layers.push_back({std::move(w), spec.kernel / 2, nl, {}});
    cin = spec.channels;
  }
  return model;
}

// ---------------------------------------------------------------------------
// variance experiment

namespace {

// mean of per-channel population variances over a (N, C, H, W) batch
double channel_variance(const std::vector<Tensor> &items) {
  const std::size_t c = items.front().extent(0);
  const std::size_t plane = items.front().size() / c;
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0, sq = 0.0;
    for (const auto &t : items) {
      const float *p = t.data() + ch * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        s += p[i];
        sq += static_cast<double>(p[i]) * p[i];
      }
    }
    const double n = static_cast<double>(plane * items.size());
    const double m = s / n;
    total += std::max(0.0, sq / n - m * m);
  }
  return total / static_cast<double>(c);
}

double minmax_quant_error(const std::vector<Tensor> &items, int bits) {
  const Tensor batch = Tensor::stack(items);
  const Range r{std::min(0.0, static_cast<double>(min_value(batch))), std::max(0.0, static_cast<double>(max_value(batch)))};
  const QuantParams p = QuantParams::per_tensor(bits, r);
  const Tensor err = activation_quant_error(batch, p);
  double s = 0.0;
  for (float v : err.values()) s += std::fabs(v);
  return s / static_cast<double>(err.size());
}

}  // namespace

std::vector<VarianceRow> experiment_variance(const ModelSpec &model, std::span<const Clip> clips, std::size_t period,
                                             int bits) {
  if (clips.empty()) throw InvalidArgument("no clips");
  if (period < 2) throw InvalidArgument("variance experiment needs period >= 2");
  const ModelSpec fp = model.full_precision();
  const ScheduleConfig schedule{period};
  const std::size_t n_layers = fp.layers.size();
  std::vector<std::vector<Tensor>> frames(n_layers), residuals(n_layers);
  for (const auto &clip : clips) {
    std::vector<Tensor> keyframe_inputs;
    for (std::size_t t = 0; t < clip.size(); ++t) {
      ForwardResult r = frame_forward(fp, clip[t]);
      if (schedule.is_keyframe(t)) keyframe_inputs = r.layer_inputs;
      for (std::size_t l = 0; l < n_layers; ++l) {
        if (!schedule.is_keyframe(t)) residuals[l].push_back(sub(r.layer_inputs[l], keyframe_inputs[l]));
        frames[l].push_back(std::move(r.layer_inputs[l]));
      }
    }
  }
  if (residuals.front().empty()) throw InvalidArgument("clips too short for a residual frame");
  std::vector<VarianceRow> rows;
  for (std::size_t l = 0; l < n_layers; ++l) {
    VarianceRow row;
    row.layer = l;
    row.frame_variance = channel_variance(frames[l]);
    row.residual_variance = channel_variance(residuals[l]);
    row.frame_quant_error = minmax_quant_error(frames[l], bits);
    row.residual_quant_error = minmax_quant_error(residuals[l], bits);
    rows.push_back(row);
  }
  return rows;
}

std::string variance_csv(std::span<const VarianceRow> rows) {
  std::ostringstream os;
  os << "layer,frame_variance,residual_variance,frame_quant_error,residual_quant_error\n";
  for (const auto &r : rows) {
    os << r.layer << ',' << fmt(r.frame_variance) << ',' << fmt(r.residual_variance) << ',' << fmt(r.frame_quant_error)
       << ',' << fmt(r.residual_quant_error) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// experiment spec

namespace {

ClipSetSpec clip_set_from_json(const nlohmann::json &j, ClipSetSpec base) {
  base.count = j.value("count", base.count);
  auto &c = base.clip;
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.channels = j.value("channels", c.channels);
  c.length = j.value("length", c.length);
  if (j.contains("pattern")) c.pattern = parse_pattern(j.at("pattern").get<std::string>());
  c.motion = j.value("motion", c.motion);
  c.noise_sigma = j.value("noise", c.noise_sigma);
  return base;
}

nlohmann::json clip_set_to_json(const ClipSetSpec &s) {
  return {{"count", s.count},       {"height", s.clip.height},          {"width", s.clip.width},
          {"channels", s.clip.channels}, {"length", s.clip.length},    {"pattern", to_string(s.clip.pattern)},
          {"motion", s.clip.motion}, {"noise", s.clip.noise_sigma}};
}

}  // namespace

ExperimentSpec experiment_from_json(const nlohmann::json &doc) {
  ExperimentSpec spec;
  try {
    if (doc.contains("seeds")) spec.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (doc.contains("model")) {
      const auto &m = doc.at("model");
      spec.model.depth = m.value("depth", spec.model.depth);
      spec.model.in_channels = m.value("in_channels", spec.model.in_channels);
      spec.model.channels = m.value("channels", spec.model.channels);
      spec.model.kernel = m.value("kernel", spec.model.kernel);
    }
    if (doc.contains("model_path")) spec.model_path = doc.at("model_path").get<std::string>();
    if (doc.contains("clips")) {
      spec.calibration_clips = clip_set_from_json(doc.at("clips"), spec.calibration_clips);
      spec.eval_clips = clip_set_from_json(doc.at("clips"), spec.eval_clips);
    }
    if (doc.contains("calibration_clips")) spec.calibration_clips = clip_set_from_json(doc.at("calibration_clips"), spec.calibration_clips);
    if (doc.contains("eval_clips")) spec.eval_clips = clip_set_from_json(doc.at("eval_clips"), spec.eval_clips);
    if (doc.contains("periods")) spec.periods = doc.at("periods").get<std::vector<std::size_t>>();
    if (doc.contains("precisions")) spec.precisions = doc.at("precisions").get<std::vector<std::string>>();
    if (doc.contains("modes")) {
      spec.modes.clear();
      for (const auto &m : doc.at("modes")) spec.modes.push_back(parse_run_mode(m.get<std::string>()));
    }
    if (doc.contains("calibration")) {
      const auto &c = doc.at("calibration");
      spec.calibration.samples = c.value("samples", spec.calibration.samples);
      spec.calibration.grid = c.value("grid", spec.calibration.grid);
      spec.calibration.period = c.value("period", spec.calibration.period);
      const auto g = c.value("granularity", std::string("per-tensor"));
      if (g != "per-tensor" && g != "per-channel") throw ParseError("unknown granularity '" + g + "'");
      spec.calibration.weight_granularity = g == "per-channel" ? Granularity::PerChannel : Granularity::PerTensor;
    }
    spec.policy.tau = doc.value("tau", spec.policy.tau);
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("malformed experiment file: ") + e.what());
  }
  for (const auto &p : spec.precisions) parse_precision(p);
  if (spec.seeds.empty()) throw ParseError("experiment needs at least one seed");
  for (auto t : spec.periods) {
    if (t < 1) throw ParseError("periods must be >= 1");
  }
  if (spec.model_path && !std::filesystem::exists(*spec.model_path)) {
    throw IoError("model file not found: " + spec.model_path->string());
  }
  return spec;
}

nlohmann::json experiment_to_json(const ExperimentSpec &spec) {
  nlohmann::json doc;
  doc["seeds"] = spec.seeds;
  doc["model"] = {{"depth", spec.model.depth},
                  {"in_channels", spec.model.in_channels},
                  {"channels", spec.model.channels},
                  {"kernel", spec.model.kernel}};
  if (spec.model_path) doc["model_path"] = spec.model_path->string();
  doc["calibration_clips"] = clip_set_to_json(spec.calibration_clips);
  doc["eval_clips"] = clip_set_to_json(spec.eval_clips);
  doc["periods"] = spec.periods;
  doc["precisions"] = spec.precisions;
  auto modes = nlohmann::json::array();
  for (auto m : spec.modes) modes.push_back(to_string(m));
  doc["modes"] = modes;
  doc["calibration"] = {{"samples", spec.calibration.samples},
                        {"grid", spec.calibration.grid},
                        {"period", spec.calibration.period},
                        {"granularity", spec.calibration.weight_granularity == Granularity::PerChannel ? "per-channel"
                                                                                                       : "per-tensor"}};
  doc["tau"] = spec.policy.tau;
  return doc;
}

// ---------------------------------------------------------------------------
// trade-off sweep

std::size_t sweep_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("RESQ_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = std::min(n, static_cast<std::size_t>(v));
  }
  return n;
}

namespace {

template <typename Fn>
auto parallel_over_seeds(const std::vector<std::uint64_t> &seeds, Fn fn) {
  using Result = decltype(fn(seeds.front()));
  std::vector<Result> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        results[i] = fn(seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min(sweep_threads(), seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

ModelSpec experiment_model(const ExperimentSpec &spec, std::uint64_t seed) {
  if (spec.model_path) return load_model(*spec.model_path);
  ToyModelSpec m = spec.model;
  m.seed = seed;
  m.in_channels = spec.eval_clips.clip.channels;
  return build_toy_model(m);
}

struct SeedData {
  ModelSpec model;
  std::vector<Clip> calibration;
  std::vector<SyntheticClip> eval;
  std::vector<std::vector<Tensor>> fp_outputs;  // [clip][frame]
};

SeedData prepare_seed(const ExperimentSpec &spec, std::uint64_t seed) {
  SeedData d;
  d.model = experiment_model(spec, seed);
  const auto calib = generate_clip_set(spec.calibration_clips, splitmix64(seed ^ 0xca11b8a7e5ull));
  d.calibration = frames_of(calib);
  d.eval = generate_clip_set(spec.eval_clips, splitmix64(seed ^ 0xe7a1ull));
  const ModelSpec fp = d.model.full_precision();
  for (const auto &clip : d.eval) {
    std::vector<Tensor> outs;
    for (const auto &f : clip.frames) outs.push_back(frame_forward(fp, f).output);
    d.fp_outputs.push_back(std::move(outs));
  }
  return d;
}

TradeoffRow evaluate(const SeedData &d, const ModelSpec &model, RunMode mode, std::size_t period,
                     const PolicyConfig &policy) {
  TradeoffRow row;
  row.mode = mode;
  row.period = mode == RunMode::Frame ? 0 : period;
  const std::size_t slots = mode == RunMode::Frame ? 1 : period;
  std::vector<double> dt_sum(slots, 0.0);
  std::vector<std::size_t> dt_count(slots, 0);
  double mse_sum = 0.0, gbops = 0.0, conv_gbops = 0.0;
  std::size_t frames = 0;
  const ScheduleConfig schedule{std::max<std::size_t>(period, 1)};
  for (std::size_t c = 0; c < d.eval.size(); ++c) {
    const SequenceResult run = run_sequence(model, d.eval[c].frames, schedule, mode, policy);
    for (std::size_t t = 0; t < run.frames.size(); ++t) {
      const double mse = mean_squared_error(run.frames[t].output, d.fp_outputs[c][t]);
      const std::size_t dt = mode == RunMode::Frame ? 0 : schedule.distance_to_keyframe(t);
      dt_sum[dt] += mse;
      ++dt_count[dt];
      mse_sum += mse;
      ++frames;
    }
    gbops += run.report.amortized_total / 1e9;
    conv_gbops += run.report.amortized_conv / 1e9;
  }
  row.mse = mse_sum / static_cast<double>(frames);
  row.amortized_gbops = gbops / static_cast<double>(d.eval.size());
  row.amortized_conv_gbops = conv_gbops / static_cast<double>(d.eval.size());
  for (std::size_t i = 0; i < slots; ++i) {
    row.mse_by_distance.push_back(dt_count[i] ? dt_sum[i] / static_cast<double>(dt_count[i]) : 0.0);
  }
  return row;
}

bool is_frame_precision(const std::string &notation) { return notation.find('|') == std::string::npos; }

}  // namespace

std::vector<TradeoffRow> experiment_tradeoff(const ExperimentSpec &spec) {
  auto per_seed = parallel_over_seeds(spec.seeds, [&](std::uint64_t seed) {
    const SeedData d = prepare_seed(spec, seed);
    std::vector<TradeoffRow> rows;
    for (const auto &notation : spec.precisions) {
      const PrecisionConfig precision = parse_precision(notation);
      if (is_frame_precision(notation)) {
        if (std::find(spec.modes.begin(), spec.modes.end(), RunMode::Frame) == spec.modes.end()) continue;
        CalibrationConfig cfg = spec.calibration;
        cfg.frame_only = true;
        const ModelSpec q = calibrate_model(d.model, d.calibration, precision, cfg);
        TradeoffRow row = evaluate(d, q, RunMode::Frame, 0, spec.policy);
        row.seed = seed;
        row.precision = notation;
        rows.push_back(std::move(row));
        continue;
      }
      for (std::size_t period : spec.periods) {
        std::vector<RunMode> modes;
        for (auto m : spec.modes) {
          if (m == RunMode::Frame) continue;
          if ((m == RunMode::ResqDynamic) == precision.has_pool()) modes.push_back(m);
        }
        if (modes.empty()) continue;
        CalibrationConfig cfg = spec.calibration;
        cfg.period = period;
        // T = 1 has no residual frames; calibrate keyframe slots only
        cfg.frame_only = period == 1;
        const ModelSpec q = calibrate_model(d.model, d.calibration, precision, cfg);
        for (auto m : modes) {
          if (m == RunMode::ResqDynamic && period == 1) continue;
          TradeoffRow row = evaluate(d, q, m, period, spec.policy);
          row.seed = seed;
          row.precision = notation;
          rows.push_back(std::move(row));
        }
      }
    }
    return rows;
  });
  std::vector<TradeoffRow> all;
  for (auto &rows : per_seed) all.insert(all.end(), rows.begin(), rows.end());
  return all;
}

std::string tradeoff_csv(std::span<const TradeoffRow> rows) {
  std::ostringstream os;
  os << "seed,mode,precision,period,amortized_gbops,amortized_conv_gbops,output_mse\n";
  for (const auto &r : rows) {
    os << r.seed << ',' << to_string(r.mode) << ',' << r.precision << ',' << r.period << ',' << fmt(r.amortized_gbops)
       << ',' << fmt(r.amortized_conv_gbops) << ',' << fmt(r.mse) << '\n';
  }
  return os.str();
}

std::string stability_csv(std::span<const TradeoffRow> rows) {
  std::ostringstream os;
  os << "seed,mode,precision,period,distance,output_mse\n";
  for (const auto &r : rows) {
    for (std::size_t dt = 0; dt < r.mse_by_distance.size(); ++dt) {
      os << r.seed << ',' << to_string(r.mode) << ',' << r.precision << ',' << r.period << ',' << dt << ','
         << fmt(r.mse_by_distance[dt]) << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// policy maps

PolicyMapResult experiment_policy_map(const ExperimentSpec &spec, const std::optional<std::filesystem::path> &out_dir) {
  const auto it = std::find_if(spec.precisions.begin(), spec.precisions.end(),
                               [](const std::string &p) { return parse_precision(p).has_pool(); });
  if (it == spec.precisions.end()) throw InvalidArgument("policy-map needs a pool precision such as W8A8|W8A{0,4,8}");
  const PrecisionConfig precision = parse_precision(*it);
  const std::size_t period = spec.periods.empty() ? spec.calibration.period : spec.periods.front();
  if (period < 2) throw InvalidArgument("policy-map needs a keyframe period >= 2");
  if (out_dir) std::filesystem::create_directories(*out_dir);

  struct Acc {
    double sum = 0, moving = 0, stat = 0;
    std::size_t n = 0, n_moving = 0, n_static = 0;
  };
  struct SeedOut {
    std::vector<PolicyMapSummaryRow> rows;
    std::size_t maps = 0;
  };

  auto per_seed = parallel_over_seeds(spec.seeds, [&](std::uint64_t seed) {
    const SeedData d = prepare_seed(spec, seed);
    CalibrationConfig cfg = spec.calibration;
    cfg.period = period;
    const ModelSpec q = calibrate_model(d.model, d.calibration, precision, cfg);
    const std::size_t n_layers = q.layers.size();
    std::vector<std::vector<Acc>> acc(period, std::vector<Acc>(n_layers));
    SeedOut out;
    const ScheduleConfig schedule{period};
    for (std::size_t c = 0; c < d.eval.size(); ++c) {
      const auto &clip = d.eval[c];
      const SequenceResult run = run_sequence(q, clip.frames, schedule, RunMode::ResqDynamic, spec.policy);
      std::size_t key = 0;
      for (std::size_t t = 0; t < run.frames.size(); ++t) {
        if (schedule.is_keyframe(t)) {
          key = t;
          continue;
        }
        const Tensor moving = change_mask(clip.clean_frames[t], clip.clean_frames[key]);
        const std::size_t dt = schedule.distance_to_keyframe(t);
        for (std::size_t l = 0; l < n_layers; ++l) {
          const IndexMap &index = run.frames[t].index_maps[l];
          const QuantizerPool &pool = q.layers[l].quant.pool();
          if (out_dir) {
            char name[128];
            std::snprintf(name, sizeof name, "seed%llu_clip%zu_frame%zu_layer%zu.pgm",
                          static_cast<unsigned long long>(seed), c, t, l);
            write_policy_pgm(*out_dir / name, index, pool);
            ++out.maps;
          }
          const Tensor bits = selected_bits(index, pool);
          Acc &a = acc[dt][l];
          for (std::size_t p = 0; p < bits.size(); ++p) {
            a.sum += bits[p];
            ++a.n;
            if (moving.size() == bits.size() && moving[p] > 0.5f) {
              a.moving += bits[p];
              ++a.n_moving;
            } else {
              a.stat += bits[p];
              ++a.n_static;
            }
          }
        }
      }
    }
    for (std::size_t dt = 1; dt < period; ++dt) {
      for (std::size_t l = 0; l < n_layers; ++l) {
        const Acc &a = acc[dt][l];
        if (a.n == 0) continue;
        PolicyMapSummaryRow r;
        r.seed = seed;
        r.distance = dt;
        r.layer = l;
        r.mean_bits = a.sum / static_cast<double>(a.n);
        r.mean_bits_moving = a.n_moving ? a.moving / static_cast<double>(a.n_moving) : 0.0;
        r.mean_bits_static = a.n_static ? a.stat / static_cast<double>(a.n_static) : 0.0;
        r.moving_pixels = a.n_moving;
        out.rows.push_back(r);
      }
    }
    return out;
  });

  PolicyMapResult result;
  for (auto &s : per_seed) {
    result.rows.insert(result.rows.end(), s.rows.begin(), s.rows.end());
    result.maps_written += s.maps;
  }
  return result;
}

std::string policy_summary_csv(std::span<const PolicyMapSummaryRow> rows) {
  std::ostringstream os;
  os << "seed,distance,layer,mean_bits,mean_bits_moving,mean_bits_static,moving_pixels\n";
  for (const auto &r : rows) {
    os << r.seed << ',' << r.distance << ',' << r.layer << ',' << fmt(r.mean_bits) << ',' << fmt(r.mean_bits_moving) << ','
       << fmt(r.mean_bits_static) << ',' << r.moving_pixels << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// output helpers

void write_policy_pgm(const std::filesystem::path &path, const IndexMap &index, const QuantizerPool &pool) {
  const auto bits = pool.bit_widths();
  const int maxval = std::max(1, *std::max_element(bits.begin(), bits.end()));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << "P5\n" << index.width() << ' ' << index.height() << '\n' << maxval << '\n';
  for (auto v : index.values()) f.put(static_cast<char>(bits.at(v - 1u)));
  if (!f) throw IoError("write failed: " + path.string());
}

Tensor read_pgm(const std::filesystem::path &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0;
  int maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || w == 0 || h == 0 || maxval < 1 || maxval > 255) throw ParseError("unsupported PGM " + path.string());
  f.get();
  std::vector<float> v(w * h);
  for (auto &x : v) {
    const int c = f.get();
    if (c == EOF) throw ParseError("truncated PGM " + path.string());
    x = static_cast<float>(c);
  }
  return Tensor({h, w}, std::move(v));
}

std::vector<std::vector<Tensor>> full_precision_layer_outputs(const ModelSpec &model, std::span<const Tensor> clip) {
  const ModelSpec fp = model.full_precision();
  std::vector<std::vector<Tensor>> out;
  for (const auto &f : clip) out.push_back(frame_forward(fp, f).layer_outputs);
  return out;
}

std::string run_report_csv(const SequenceResult &run, const std::vector<std::vector<Tensor>> &fp_layer_outputs,
                           bool giga) {
  std::ostringstream os;
  os << "frame_index,is_keyframe,layer,bops,output_mse_vs_fp32\n";
  for (const auto &e : run.report.entries) {
    const double mse = mean_squared_error(run.frames.at(e.frame).layer_outputs.at(e.layer), fp_layer_outputs.at(e.frame).at(e.layer));
    os << e.frame << ',' << (e.is_keyframe ? 1 : 0) << ',' << e.layer << ',';
    if (giga) {
      os << fmt(static_cast<double>(e.total()) / 1e9);
    } else {
      os << e.total();
    }
    os << ',' << fmt(mse) << '\n';
  }
  return os.str();
}

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("spearman needs two equal-length series");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j);
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(rx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace resq
