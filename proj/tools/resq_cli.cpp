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

// Command-line front end. Talks to the simulator only through the C API.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "resq/resq.h"

namespace fs = std::filesystem;

namespace {

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string &m) : std::runtime_error(m), code(c) {}
};

void check(resq_status s, const std::string &context) {
  if (s != RESQ_OK) throw CliError(static_cast<int>(s), context + ": " + resq_last_error());
}

template <typename T, void (*Free)(T *)>
struct Handle {
  T *ptr = nullptr;
  Handle() = default;
  Handle(const Handle &) = delete;
  Handle &operator=(const Handle &) = delete;
  Handle(Handle &&o) noexcept : ptr(o.ptr) { o.ptr = nullptr; }
  ~Handle() { Free(ptr); }
  T **out() { return &ptr; }
};
using Clip = Handle<resq_clip, resq_clip_free>;
using Model = Handle<resq_model, resq_model_free>;
using Run = Handle<resq_run, resq_run_free>;

std::string read_file(const fs::path &p) {
  std::ifstream f(p);
  if (!f) throw CliError(RESQ_ERR_IO, "cannot open " + p.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<int> parse_ints(const std::string &list) {
  std::vector<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception &) {
      throw CliError(RESQ_ERR_PARSE, "bad integer list '" + list + "'");
    }
  }
  return out;
}

std::vector<fs::path> clip_files(const fs::path &p) {
  std::vector<fs::path> files;
  if (fs::is_directory(p)) {
    for (const auto &e : fs::directory_iterator(p)) {
      if (e.is_regular_file() && e.path().extension() == ".rtf") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::exists(p)) {
    files.push_back(p);
  }
  if (files.empty()) throw CliError(RESQ_ERR_IO, "no .rtf clips found at " + p.string());
  return files;
}

Model load_model(const std::string &path, const std::string &calib) {
  Model m;
  check(resq_model_load(path.c_str(), m.out()), "loading model");
  if (!calib.empty()) check(resq_model_load_calibration(m.ptr, calib.c_str()), "loading calibration");
  return m;
}

// Experiment config: file contents (or defaults) with CLI overrides applied.
std::string experiment_config(const std::string &path, const std::optional<std::uint64_t> &seed, std::size_t n_seeds) {
  nlohmann::json doc = nlohmann::json::object();
  if (!path.empty()) {
    try {
      doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error &e) {
      throw CliError(RESQ_ERR_PARSE, "config " + path + ": " + e.what());
    }
  }
  if (seed || n_seeds > 0) {
    const std::uint64_t first = seed.value_or(0);
    const std::size_t n = n_seeds > 0 ? n_seeds : 1;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < n; ++i) seeds.push_back(first + i);
    doc["seeds"] = seeds;
  }
  return doc.dump();
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Residual quantization video inference simulator"};
  app.set_version_flag("--version", std::string(resq_version()));
  app.require_subcommand(1);

  // gen-clips
  auto *gen = app.add_subcommand("gen-clips", "Generate synthetic clips as RTF tensors (T, C, H, W)");
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  std::size_t gen_count = 4;
  resq_clip_options clip_opts;
  resq_clip_options_init(&clip_opts);
  std::string pattern = clip_opts.pattern;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Base seed");
  gen->add_option("--count", gen_count, "Number of clips")->check(CLI::PositiveNumber);
  gen->add_option("--height", clip_opts.height)->check(CLI::PositiveNumber);
  gen->add_option("--width", clip_opts.width)->check(CLI::PositiveNumber);
  gen->add_option("--channels", clip_opts.channels)->check(CLI::PositiveNumber);
  gen->add_option("--length", clip_opts.length, "Frames per clip")->check(CLI::PositiveNumber);
  gen->add_option("--pattern", pattern)
      ->check(CLI::IsMember({"translating-square", "translating-texture", "rotating-bars", "white-noise"}));
  gen->add_option("--motion", clip_opts.motion, "Pixels per frame");
  gen->add_option("--noise", clip_opts.noise_sigma, "Gaussian noise sigma");

  // build-model
  auto *build = app.add_subcommand("build-model", "Build a random toy convolutional model");
  std::string build_out;
  resq_model_options model_opts;
  resq_model_options_init(&model_opts);
  bool identity = false;
  build->add_option("--out", build_out, "Model JSON path")->required();
  build->add_option("--seed", model_opts.seed);
  build->add_option("--depth", model_opts.depth)->check(CLI::PositiveNumber);
  build->add_option("--in-channels", model_opts.in_channels)->check(CLI::PositiveNumber);
  build->add_option("--channels", model_opts.channels)->check(CLI::PositiveNumber);
  build->add_option("--kernel", model_opts.kernel)->check(CLI::PositiveNumber);
  build->add_flag("--identity", identity, "1x1 identity layers");

  // calibrate
  auto *calib = app.add_subcommand("calibrate", "Calibrate quantizer ranges on clips");
  std::string cal_model, cal_clips, cal_out, cal_key = "W8A8", cal_res = "W4A4";
  std::uint64_t cal_seed = 0;
  bool cal_frame_only = false, cal_per_channel = false;
  resq_calibration_options cal_opts;
  resq_calibration_options_init(&cal_opts);
  calib->add_option("--model", cal_model)->required();
  calib->add_option("--clips", cal_clips, "Directory of .rtf clips or a single clip")->required();
  calib->add_option("--out", cal_out, "Calibration JSON path")->required();
  calib->add_option("--seed", cal_seed, "Accepted for uniformity; calibration is deterministic");
  calib->add_option("--keyframe-bits", cal_key, "WxAy");
  calib->add_option("--residual-bits", cal_res, "WxAy or a pool WxA{a,b,c}");
  calib->add_option("--period", cal_opts.period)->check(CLI::PositiveNumber);
  calib->add_option("--samples", cal_opts.samples)->check(CLI::PositiveNumber);
  calib->add_option("--grid", cal_opts.grid)->check(CLI::Range(2, 100000));
  calib->add_flag("--per-channel", cal_per_channel, "Per-output-channel weight scales");
  calib->add_flag("--frame-only", cal_frame_only, "Keyframe quantizers on every frame (frame baseline)");

  // run
  auto *run = app.add_subcommand("run", "Run a clip through a calibrated model");
  std::string run_model, run_calib, run_clip, run_mode = "resq-pairwise", run_pool, run_outputs, run_policy, run_report,
                                                run_out;
  std::uint64_t run_seed = 0;
  bool giga = false;
  resq_run_options run_opts;
  resq_run_options_init(&run_opts);
  run->add_option("--model", run_model)->required();
  run->add_option("--calib", run_calib);
  run->add_option("--clip", run_clip)->required();
  run->add_option("--period", run_opts.period)->check(CLI::PositiveNumber);
  run->add_option("--mode", run_mode)->check(CLI::IsMember({"frame", "resq", "resq-pairwise", "resq-recurrent", "resq-dynamic"}));
  run->add_option("--tau", run_opts.tau, "Policy threshold");
  run->add_option("--pool", run_pool, "Expected pool bit-widths, e.g. 0,4,8");
  run->add_option("--dump-outputs", run_outputs, "Directory for per-frame output RTFs");
  run->add_option("--dump-policy", run_policy, "Directory for per-layer PGM policy maps");
  run->add_option("--report", run_report, "Per-frame, per-layer CSV report");
  run->add_flag("--giga", giga, "Report BOPs in units of 1e9");
  run->add_option("--seed", run_seed, "Accepted for uniformity; runs are deterministic");
  run->add_option("--out", run_out, "Summary JSON path");

  // experiments
  std::string exp_config, exp_out;
  std::optional<std::uint64_t> exp_seed;
  std::size_t exp_seeds = 0;
  auto add_experiment = [&](const char *name, const char *help) {
    auto *sub = app.add_subcommand(name, help);
    sub->add_option("--config", exp_config, "JSON experiment config");
    sub->add_option("--out", exp_out, "Output directory")->required();
    sub->add_option("--seed", exp_seed, "First seed (overrides the config)");
    sub->add_option("--seeds", exp_seeds, "Number of consecutive seeds");
    return sub;
  };
  auto *sweep = add_experiment("sweep", "BOPs/accuracy trade-off over periods and precisions");
  auto *policy = add_experiment("policy-map", "Dynamic policy maps and their summary");
  auto *variance = add_experiment("variance", "Layer-input variance of frames versus residuals");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      fs::create_directories(gen_out);
      clip_opts.pattern = pattern.c_str();
      for (std::size_t i = 0; i < gen_count; ++i) {
        clip_opts.seed = gen_seed + i;
        Clip c;
        check(resq_clip_generate(&clip_opts, c.out()), "generating clip");
        char name[32];
        std::snprintf(name, sizeof name, "clip_%03zu.rtf", i);
        check(resq_clip_save(c.ptr, (fs::path(gen_out) / name).string().c_str()), "saving clip");
      }
      std::cout << "wrote " << gen_count << " clips to " << gen_out << "\n";
    } else if (*build) {
      model_opts.identity = identity ? 1 : 0;
      Model m;
      check(resq_model_build(&model_opts, m.out()), "building model");
      check(resq_model_save(m.ptr, build_out.c_str()), "saving model");
      std::cout << "wrote " << build_out << "\n";
    } else if (*calib) {
      Model m = load_model(cal_model, "");
      std::vector<Clip> clips;
      std::vector<const resq_clip *> ptrs;
      for (const auto &f : clip_files(cal_clips)) {
        Clip c;
        check(resq_clip_load(f.string().c_str(), c.out()), "loading " + f.string());
        ptrs.push_back(c.ptr);
        clips.push_back(std::move(c));
      }
      cal_opts.keyframe_bits = cal_key.c_str();
      cal_opts.residual_bits = cal_frame_only ? nullptr : cal_res.c_str();
      cal_opts.per_channel_weights = cal_per_channel ? 1 : 0;
      check(resq_model_calibrate(m.ptr, ptrs.data(), ptrs.size(), &cal_opts), "calibrating");
      check(resq_model_save_calibration(m.ptr, cal_out.c_str()), "saving calibration");
      std::cout << "wrote " << cal_out << "\n";
    } else if (*run) {
      Model m = load_model(run_model, run_calib);
      if (!run_pool.empty()) {
        const auto expected = parse_ints(run_pool);
        std::size_t layers = 0;
        check(resq_model_layer_count(m.ptr, &layers), "model");
        for (std::size_t l = 0; l < layers; ++l) {
          std::vector<int> bits(16);
          std::size_t n = 0;
          check(resq_model_residual_pool(m.ptr, l, bits.data(), bits.size(), &n), "reading pool");
          bits.resize(std::min(n, bits.size()));
          if (bits != expected) {
            throw CliError(RESQ_ERR_INVALID_ARGUMENT, "--pool " + run_pool + " does not match the calibrated pool of layer " +
                                                          std::to_string(l));
          }
        }
      }
      Clip c;
      check(resq_clip_load(run_clip.c_str(), c.out()), "loading clip");
      run_opts.mode = run_mode.c_str();
      Run r;
      check(resq_run_sequence(m.ptr, c.ptr, &run_opts, r.out()), "running");
      if (!run_report.empty()) check(resq_run_write_report(r.ptr, run_report.c_str(), giga ? 1 : 0), "writing report");
      if (!run_outputs.empty()) check(resq_run_dump_outputs(r.ptr, run_outputs.c_str()), "dumping outputs");
      if (!run_policy.empty()) check(resq_run_dump_policy(r.ptr, run_policy.c_str()), "dumping policy maps");
      double conv = 0, total = 0, mse = 0;
      std::size_t frames = 0;
      check(resq_run_amortized_bops(r.ptr, &conv, &total), "bops");
      check(resq_run_output_mse(r.ptr, &mse), "mse");
      check(resq_run_frame_count(r.ptr, &frames), "frames");
      const double unit = giga ? 1e9 : 1.0;
      nlohmann::json summary{{"mode", run_mode},
                             {"period", run_opts.period},
                             {"frames", frames},
                             {giga ? "amortized_gbops" : "amortized_bops", total / unit},
                             {giga ? "amortized_conv_gbops" : "amortized_conv_bops", conv / unit},
                             {"output_mse_vs_fp32", mse}};
      if (!run_out.empty()) {
        std::ofstream f(run_out);
        if (!f) throw CliError(RESQ_ERR_IO, "cannot write " + run_out);
        f << summary.dump(2) << "\n";
      }
      std::cout << summary.dump() << "\n";
    } else {
      const std::string config = experiment_config(exp_config, exp_seed, exp_seeds);
      if (*sweep) {
        check(resq_experiment_sweep(config.c_str(), exp_out.c_str()), "sweep");
      } else if (*policy) {
        check(resq_experiment_policy_map(config.c_str(), exp_out.c_str()), "policy-map");
      } else if (*variance) {
        check(resq_experiment_variance(config.c_str(), exp_out.c_str()), "variance");
      }
      std::cout << "results in " << exp_out << "\n";
    }
  } catch (const CliError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code == 0 ? 1 : e.code;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
