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

#include "resq/resq.h"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "resq/calibration.hpp"
#include "resq/engine.hpp"
#include "resq/errors.hpp"
#include "resq/harness.hpp"

struct resq_clip {
  std::vector<resq::Tensor> frames;
};

struct resq_model {
  resq::ModelSpec spec;
  bool calibrated = false;
};

struct resq_run {
  resq::RunMode mode;
  resq::SequenceResult result;
  std::vector<const resq::QuantizerPool *> pools;  // per layer, dynamic runs only
  resq::ModelSpec model;
  std::vector<std::vector<resq::Tensor>> fp_layer_outputs;
};

struct resq_session {
  resq::ModelSpec model;
  std::unique_ptr<resq::Session> session;
};

namespace {

thread_local std::string g_last_error;

resq_status fail(resq_status status, const std::string &message) {
  g_last_error = message;
  return status;
}

// Maps the exception hierarchy onto status codes.
template <typename Fn>
resq_status guarded(Fn &&fn) {
  try {
    fn();
    g_last_error.clear();
    return RESQ_OK;
  } catch (const resq::DimensionError &e) {
    return fail(RESQ_ERR_DIMENSION, e.what());
  } catch (const resq::DegenerateRangeError &e) {
    return fail(RESQ_ERR_DEGENERATE_RANGE, e.what());
  } catch (const resq::SequencingError &e) {
    return fail(RESQ_ERR_SEQUENCING, e.what());
  } catch (const resq::IoError &e) {
    return fail(RESQ_ERR_IO, e.what());
  } catch (const resq::ParseError &e) {
    return fail(RESQ_ERR_PARSE, e.what());
  } catch (const resq::InvalidArgument &e) {
    return fail(RESQ_ERR_INVALID_ARGUMENT, e.what());
  } catch (const nlohmann::json::exception &e) {
    return fail(RESQ_ERR_PARSE, e.what());
  } catch (const std::filesystem::filesystem_error &e) {
    return fail(RESQ_ERR_IO, e.what());
  } catch (const std::bad_alloc &) {
    return fail(RESQ_ERR_INTERNAL, "out of memory");
  } catch (const std::exception &e) {
    return fail(RESQ_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(RESQ_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char *what) {
  if (!ok) throw resq::InvalidArgument(what);
}

std::string str_or(const char *s, const char *fallback) { return s ? std::string(s) : std::string(fallback); }

resq::ExperimentSpec parse_experiment(const char *config_json) {
  require(config_json != nullptr, "config is null");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::parse_error &e) {
    throw resq::ParseError(std::string("experiment config is not valid JSON: ") + e.what());
  }
  return resq::experiment_from_json(doc);
}

}  // namespace

extern "C" {

const char *resq_version(void) { return "0.1.0"; }

const char *resq_status_string(resq_status status) {
  switch (status) {
    case RESQ_OK:
      return "ok";
    case RESQ_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case RESQ_ERR_DIMENSION:
      return "dimension mismatch";
    case RESQ_ERR_DEGENERATE_RANGE:
      return "degenerate range";
    case RESQ_ERR_SEQUENCING:
      return "sequencing error";
    case RESQ_ERR_IO:
      return "i/o error";
    case RESQ_ERR_PARSE:
      return "parse error";
    case RESQ_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char *resq_last_error(void) { return g_last_error.c_str(); }

// ---------------------------------------------------------------------------
// clips

void resq_clip_options_init(resq_clip_options *o) {
  if (!o) return;
  const resq::SyntheticClipSpec d;
  o->height = d.height;
  o->width = d.width;
  o->channels = d.channels;
  o->length = d.length;
  o->pattern = "translating-square";
  o->motion = d.motion;
  o->noise_sigma = d.noise_sigma;
  o->seed = d.seed;
}

resq_status resq_clip_generate(const resq_clip_options *o, resq_clip **out) {
  return guarded([&] {
    require(o && out, "null argument");
    resq::SyntheticClipSpec s;
    s.height = o->height;
    s.width = o->width;
    s.channels = o->channels;
    s.length = o->length;
    s.pattern = resq::parse_pattern(str_or(o->pattern, "translating-square"));
    s.motion = o->motion;
    s.noise_sigma = o->noise_sigma;
    s.seed = o->seed;
    auto clip = std::make_unique<resq_clip>();
    clip->frames = resq::generate_clip(s).frames;
    *out = clip.release();
  });
}

resq_status resq_clip_create(const float *data, size_t frames, size_t channels, size_t height, size_t width,
                             resq_clip **out) {
  return guarded([&] {
    require(data && out, "null argument");
    require(frames > 0, "clip needs at least one frame");
    const resq::Shape shape{channels, height, width};
    const std::size_t n = resq::shape_volume(shape);
    auto clip = std::make_unique<resq_clip>();
    for (std::size_t t = 0; t < frames; ++t) {
      clip->frames.emplace_back(shape, std::vector<float>(data + t * n, data + (t + 1) * n));
    }
    *out = clip.release();
  });
}

resq_status resq_clip_load(const char *path, resq_clip **out) {
  return guarded([&] {
    require(path && out, "null argument");
    const resq::Tensor t = resq::read_rtf(path);
    if (t.rank() != 4) throw resq::DimensionError("clip file must hold a (T, C, H, W) tensor, got " + resq::shape_to_string(t.shape()));
    auto clip = std::make_unique<resq_clip>();
    for (std::size_t i = 0; i < t.extent(0); ++i) clip->frames.push_back(t.slice(i));
    *out = clip.release();
  });
}

resq_status resq_clip_save(const resq_clip *clip, const char *path) {
  return guarded([&] {
    require(clip && path, "null argument");
    resq::write_rtf(path, resq::Tensor::stack(clip->frames));
  });
}

resq_status resq_clip_shape(const resq_clip *clip, size_t *frames, size_t *channels, size_t *height, size_t *width) {
  return guarded([&] {
    require(clip != nullptr, "null clip");
    const auto &s = clip->frames.front().shape();
    if (frames) *frames = clip->frames.size();
    if (channels) *channels = s[0];
    if (height) *height = s[1];
    if (width) *width = s[2];
  });
}

resq_status resq_clip_frame(const resq_clip *clip, size_t t, float *buffer, size_t capacity) {
  return guarded([&] {
    require(clip && buffer, "null argument");
    require(t < clip->frames.size(), "frame index out of range");
    const auto &f = clip->frames[t];
    require(capacity >= f.size(), "buffer too small");
    std::memcpy(buffer, f.data(), f.size() * sizeof(float));
  });
}

void resq_clip_free(resq_clip *clip) { delete clip; }

// ---------------------------------------------------------------------------
// models

void resq_model_options_init(resq_model_options *o) {
  if (!o) return;
  const resq::ToyModelSpec d;
  o->depth = d.depth;
  o->in_channels = d.in_channels;
  o->channels = d.channels;
  o->kernel = d.kernel;
  o->seed = d.seed;
  o->identity = 0;
}

resq_status resq_model_build(const resq_model_options *o, resq_model **out) {
  return guarded([&] {
    require(o && out, "null argument");
    resq::ToyModelSpec s{o->depth, o->in_channels, o->channels, o->kernel, o->seed, o->identity != 0};
    auto m = std::make_unique<resq_model>();
    m->spec = resq::build_toy_model(s);
    *out = m.release();
  });
}

resq_status resq_model_load(const char *path, resq_model **out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto m = std::make_unique<resq_model>();
    m->spec = resq::load_model(path);
    *out = m.release();
  });
}

resq_status resq_model_save(const resq_model *model, const char *path) {
  return guarded([&] {
    require(model && path, "null argument");
    resq::save_model(model->spec, path);
  });
}

resq_status resq_model_layer_count(const resq_model *model, size_t *count) {
  return guarded([&] {
    require(model && count, "null argument");
    *count = model->spec.layers.size();
  });
}

void resq_model_free(resq_model *model) { delete model; }

void resq_calibration_options_init(resq_calibration_options *o) {
  if (!o) return;
  const resq::CalibrationConfig d;
  o->keyframe_bits = "W8A8";
  o->residual_bits = "W4A4";
  o->period = d.period;
  o->samples = d.samples;
  o->grid = d.grid;
  o->per_channel_weights = 0;
}

resq_status resq_model_calibrate(resq_model *model, const resq_clip *const *clips, size_t n_clips,
                                 const resq_calibration_options *o) {
  return guarded([&] {
    require(model && clips && o && o->keyframe_bits, "null argument");
    require(n_clips > 0, "calibration needs at least one clip");
    std::vector<resq::Clip> data;
    for (std::size_t i = 0; i < n_clips; ++i) {
      require(clips[i] != nullptr, "null clip");
      data.push_back(clips[i]->frames);
    }
    std::string notation = o->keyframe_bits;
    if (notation.find('|') != std::string::npos) throw resq::ParseError("keyframe bits must be of the form WxAy");
    if (o->residual_bits) notation += std::string("|") + o->residual_bits;
    const resq::PrecisionConfig precision = resq::parse_precision(notation);
    resq::CalibrationConfig cfg;
    cfg.period = o->period;
    cfg.samples = o->samples;
    cfg.grid = o->grid;
    cfg.weight_granularity = o->per_channel_weights ? resq::Granularity::PerChannel : resq::Granularity::PerTensor;
    cfg.frame_only = o->residual_bits == nullptr;
    model->spec = resq::calibrate_model(model->spec, data, precision, cfg);
    model->calibrated = true;
  });
}

resq_status resq_model_save_calibration(const resq_model *model, const char *path) {
  return guarded([&] {
    require(model && path, "null argument");
    const std::string text = resq::quant_config_to_json(model->spec).dump(2) + "\n";
    resq::write_text(path, text);
  });
}

resq_status resq_model_load_calibration(resq_model *model, const char *path) {
  return guarded([&] {
    require(model && path, "null argument");
    std::ifstream f(path);
    if (!f) throw resq::IoError(std::string("cannot open ") + path);
    nlohmann::json doc;
    try {
      f >> doc;
    } catch (const nlohmann::json::parse_error &e) {
      throw resq::ParseError(std::string("calibration file is not valid JSON: ") + e.what());
    }
    resq::apply_quant_config(model->spec, doc);
    model->calibrated = true;
  });
}

resq_status resq_model_residual_pool(const resq_model *model, size_t layer, int *bits, size_t capacity, size_t *count) {
  return guarded([&] {
    require(model && count, "null argument");
    require(layer < model->spec.layers.size(), "layer index out of range");
    const auto &q = model->spec.layers[layer].quant;
    if (!q.has_pool()) {
      *count = 0;
      return;
    }
    const auto widths = q.pool().bit_widths();
    *count = widths.size();
    for (std::size_t i = 0; i < widths.size() && i < capacity && bits; ++i) bits[i] = widths[i];
  });
}

// ---------------------------------------------------------------------------
// runs

void resq_run_options_init(resq_run_options *o) {
  if (!o) return;
  o->mode = "resq-pairwise";
  o->period = 3;
  o->tau = resq::PolicyConfig{}.tau;
}

resq_status resq_run_sequence(const resq_model *model, const resq_clip *clip, const resq_run_options *o, resq_run **out) {
  return guarded([&] {
    require(model && clip && o && out, "null argument");
    auto run = std::make_unique<resq_run>();
    run->mode = resq::parse_run_mode(str_or(o->mode, "resq-pairwise"));
    run->model = model->spec;
    if (run->mode == resq::RunMode::ResqDynamic) {
      for (const auto &layer : run->model.layers) {
        if (!layer.quant.has_pool()) throw resq::InvalidArgument("resq-dynamic needs a calibration with a residual pool");
      }
    }
    run->result = resq::run_sequence(run->model, clip->frames, resq::ScheduleConfig{o->period}, run->mode,
                                     resq::PolicyConfig{o->tau});
    for (const auto &layer : run->model.layers) run->pools.push_back(layer.quant.has_pool() ? &layer.quant.pool() : nullptr);
    run->fp_layer_outputs = resq::full_precision_layer_outputs(run->model, clip->frames);
    *out = run.release();
  });
}

resq_status resq_run_frame_count(const resq_run *run, size_t *frames) {
  return guarded([&] {
    require(run && frames, "null argument");
    *frames = run->result.frames.size();
  });
}

resq_status resq_run_amortized_bops(const resq_run *run, double *conv, double *total) {
  return guarded([&] {
    require(run != nullptr, "null run");
    if (conv) *conv = run->result.report.amortized_conv;
    if (total) *total = run->result.report.amortized_total;
  });
}

resq_status resq_run_output_mse(const resq_run *run, double *mse) {
  return guarded([&] {
    require(run && mse, "null argument");
    double sum = 0.0;
    for (std::size_t t = 0; t < run->result.frames.size(); ++t) {
      sum += resq::mean_squared_error(run->result.frames[t].output, run->fp_layer_outputs[t].back());
    }
    *mse = sum / static_cast<double>(run->result.frames.size());
  });
}

resq_status resq_run_output(const resq_run *run, size_t t, float *buffer, size_t capacity, size_t *size) {
  return guarded([&] {
    require(run != nullptr, "null run");
    require(t < run->result.frames.size(), "frame index out of range");
    const auto &y = run->result.frames[t].output;
    if (size) *size = y.size();
    if (buffer) {
      require(capacity >= y.size(), "buffer too small");
      std::memcpy(buffer, y.data(), y.size() * sizeof(float));
    }
  });
}

resq_status resq_run_write_report(const resq_run *run, const char *path, int giga) {
  return guarded([&] {
    require(run && path, "null argument");
    resq::write_text(path, resq::run_report_csv(run->result, run->fp_layer_outputs, giga != 0));
  });
}

resq_status resq_run_dump_outputs(const resq_run *run, const char *dir) {
  return guarded([&] {
    require(run && dir, "null argument");
    const std::filesystem::path root(dir);
    std::filesystem::create_directories(root);
    char name[32];
    for (std::size_t t = 0; t < run->result.frames.size(); ++t) {
      std::snprintf(name, sizeof name, "frame_%04zu.rtf", t);
      resq::write_rtf(root / name, run->result.frames[t].output);
    }
  });
}

resq_status resq_run_dump_policy(const resq_run *run, const char *dir) {
  return guarded([&] {
    require(run && dir, "null argument");
    if (run->mode != resq::RunMode::ResqDynamic) throw resq::InvalidArgument("policy maps exist only for resq-dynamic runs");
    const std::filesystem::path root(dir);
    std::filesystem::create_directories(root);
    char name[48];
    for (std::size_t t = 0; t < run->result.frames.size(); ++t) {
      const auto &maps = run->result.frames[t].index_maps;
      for (std::size_t l = 0; l < maps.size(); ++l) {
        std::snprintf(name, sizeof name, "frame_%04zu_layer_%02zu.pgm", t, l);
        resq::write_policy_pgm(root / name, maps[l], *run->pools[l]);
      }
    }
  });
}

void resq_run_free(resq_run *run) { delete run; }

// ---------------------------------------------------------------------------
// sessions

resq_status resq_session_create(const resq_model *model, const resq_run_options *o, resq_session **out) {
  return guarded([&] {
    require(model && o && out, "null argument");
    auto s = std::make_unique<resq_session>();
    s->model = model->spec;
    const auto mode = resq::parse_run_mode(str_or(o->mode, "resq-pairwise"));
    s->session = std::make_unique<resq::Session>(s->model, resq::ScheduleConfig{o->period}, mode, resq::PolicyConfig{o->tau});
    *out = s.release();
  });
}

resq_status resq_session_push(resq_session *session, const float *frame, size_t channels, size_t height, size_t width,
                              float *out, size_t capacity, size_t *size, uint64_t *bops) {
  return guarded([&] {
    require(session && frame, "null argument");
    const resq::Shape shape{channels, height, width};
    resq::Tensor x(shape, std::vector<float>(frame, frame + resq::shape_volume(shape)));
    const resq::ForwardResult r = session->session->push(x);
    if (size) *size = r.output.size();
    if (out) {
      require(capacity >= r.output.size(), "output buffer too small");
      std::memcpy(out, r.output.data(), r.output.size() * sizeof(float));
    }
    if (bops) {
      std::uint64_t total = 0;
      for (const auto &c : r.costs) total += c.total();
      *bops = total;
    }
  });
}

void resq_session_free(resq_session *session) { delete session; }

// ---------------------------------------------------------------------------
// experiments

resq_status resq_experiment_sweep(const char *config_json, const char *out_dir) {
  return guarded([&] {
    require(out_dir != nullptr, "null output directory");
    const resq::ExperimentSpec spec = parse_experiment(config_json);
    const auto rows = resq::experiment_tradeoff(spec);
    const std::filesystem::path root(out_dir);
    resq::write_text(root / "tradeoff.csv", resq::tradeoff_csv(rows));
    resq::write_text(root / "stability.csv", resq::stability_csv(rows));
    resq::write_text(root / "config.json", resq::experiment_to_json(spec).dump(2) + "\n");
  });
}

resq_status resq_experiment_policy_map(const char *config_json, const char *out_dir) {
  return guarded([&] {
    require(out_dir != nullptr, "null output directory");
    const resq::ExperimentSpec spec = parse_experiment(config_json);
    const std::filesystem::path root(out_dir);
    const auto result = resq::experiment_policy_map(spec, root / "maps");
    resq::write_text(root / "policy_summary.csv", resq::policy_summary_csv(result.rows));
    resq::write_text(root / "config.json", resq::experiment_to_json(spec).dump(2) + "\n");
  });
}

resq_status resq_experiment_variance(const char *config_json, const char *out_dir) {
  return guarded([&] {
    require(out_dir != nullptr, "null output directory");
    const resq::ExperimentSpec spec = parse_experiment(config_json);
    const int bits = nlohmann::json::parse(config_json).value("variance_bits", 4);
    const std::size_t period = spec.periods.empty() ? spec.calibration.period : spec.periods.front();
    std::ostringstream csv;
    csv << "seed,";
    bool header = true;
    for (auto seed : spec.seeds) {
      resq::ModelSpec model;
      if (spec.model_path) {
        model = resq::load_model(*spec.model_path);
      } else {
        resq::ToyModelSpec m = spec.model;
        m.seed = seed;
        m.in_channels = spec.eval_clips.clip.channels;
        model = resq::build_toy_model(m);
      }
      const auto clips = resq::frames_of(resq::generate_clip_set(spec.eval_clips, seed));
      const auto rows = resq::experiment_variance(model, clips, period, bits);
      std::istringstream body(resq::variance_csv(rows));
      std::string line;
      std::getline(body, line);
      if (header) {
        csv << line << '\n';
        header = false;
      }
      while (std::getline(body, line)) csv << seed << ',' << line << '\n';
    }
    const std::filesystem::path root(out_dir);
    resq::write_text(root / "variance.csv", csv.str());
  });
}

}  // extern "C"
