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

#include <filesystem>
#include <string>
#include <vector>

#include "resq/resq.h"

namespace {

namespace fs = std::filesystem;

resq_clip *small_clip(uint64_t seed, double motion = 1.0) {
  resq_clip_options o;
  resq_clip_options_init(&o);
  o.height = o.width = 12;
  o.channels = 2;
  o.length = 6;
  o.pattern = "translating-square";
  o.motion = motion;
  o.seed = seed;
  resq_clip *c = nullptr;
  EXPECT_EQ(resq_clip_generate(&o, &c), RESQ_OK);
  return c;
}

resq_model *calibrated_model(const char *residual_bits) {
  resq_model_options mo;
  resq_model_options_init(&mo);
  mo.depth = 2;
  mo.in_channels = 2;
  mo.channels = 3;
  mo.kernel = 3;
  resq_model *m = nullptr;
  EXPECT_EQ(resq_model_build(&mo, &m), RESQ_OK);
  resq_clip *c = small_clip(3);
  resq_calibration_options co;
  resq_calibration_options_init(&co);
  co.residual_bits = residual_bits;
  co.samples = 4;
  co.grid = 6;
  const resq_clip *clips[] = {c};
  EXPECT_EQ(resq_model_calibrate(m, clips, 1, &co), RESQ_OK);
  resq_clip_free(c);
  return m;
}

TEST(CApi, StatusStringsAndLastError) {
  EXPECT_STREQ(resq_status_string(RESQ_OK), "ok");
  EXPECT_NE(std::string(resq_version()), "");
  resq_clip *c = nullptr;
  EXPECT_EQ(resq_clip_load("/nonexistent/clip.rtf", &c), RESQ_ERR_IO);
  EXPECT_EQ(c, nullptr);
  EXPECT_NE(std::string(resq_last_error()), "");
  EXPECT_EQ(resq_clip_generate(nullptr, &c), RESQ_ERR_INVALID_ARGUMENT);
}

TEST(CApi, ErrorCodesFollowExceptionKinds) {
  resq_clip_options o;
  resq_clip_options_init(&o);
  o.pattern = "spiral";
  resq_clip *c = nullptr;
  EXPECT_EQ(resq_clip_generate(&o, &c), RESQ_ERR_PARSE);

  const std::vector<float> data(2 * 3 * 4 * 4, 0.5f);
  ASSERT_EQ(resq_clip_create(data.data(), 2, 3, 4, 4, &c), RESQ_OK);
  resq_model *m = calibrated_model("W8A4");
  resq_run_options ro;
  resq_run_options_init(&ro);
  resq_run *run = nullptr;
  EXPECT_EQ(resq_run_sequence(m, c, &ro, &run), RESQ_ERR_DIMENSION);  // 3 channels into a 2-channel model
  ro.mode = "warp";
  EXPECT_EQ(resq_run_sequence(m, c, &ro, &run), RESQ_ERR_PARSE);
  ro.mode = "resq-dynamic";
  resq_clip_free(c);
  c = small_clip(1);
  EXPECT_EQ(resq_run_sequence(m, c, &ro, &run), RESQ_ERR_INVALID_ARGUMENT);  // no pool
  EXPECT_EQ(run, nullptr);
  resq_clip_free(c);
  resq_model_free(m);
}

TEST(CApi, ClipRoundTripThroughDisk) {
  resq_clip *c = small_clip(7);
  const fs::path p = fs::temp_directory_path() / "resq_capi_clip.rtf";
  ASSERT_EQ(resq_clip_save(c, p.c_str()), RESQ_OK);
  resq_clip *back = nullptr;
  ASSERT_EQ(resq_clip_load(p.c_str(), &back), RESQ_OK);
  size_t t = 0, ch = 0, h = 0, w = 0;
  ASSERT_EQ(resq_clip_shape(back, &t, &ch, &h, &w), RESQ_OK);
  EXPECT_EQ(t, 6u);
  EXPECT_EQ(ch, 2u);
  std::vector<float> a(ch * h * w), b(ch * h * w);
  for (size_t i = 0; i < t; ++i) {
    ASSERT_EQ(resq_clip_frame(c, i, a.data(), a.size()), RESQ_OK);
    ASSERT_EQ(resq_clip_frame(back, i, b.data(), b.size()), RESQ_OK);
    EXPECT_EQ(a, b);
  }
  EXPECT_EQ(resq_clip_frame(back, 0, b.data(), 3), RESQ_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(resq_clip_frame(back, 6, b.data(), b.size()), RESQ_ERR_INVALID_ARGUMENT);
  resq_clip_free(c);
  resq_clip_free(back);
  fs::remove(p);
}

TEST(CApi, ModelAndCalibrationPersist) {
  resq_model *m = calibrated_model("W8A{0,4,8}");
  const fs::path dir = fs::temp_directory_path() / "resq_capi_model";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ASSERT_EQ(resq_model_save(m, (dir / "model.json").c_str()), RESQ_OK);
  ASSERT_EQ(resq_model_save_calibration(m, (dir / "quant.json").c_str()), RESQ_OK);

  resq_model *loaded = nullptr;
  ASSERT_EQ(resq_model_load((dir / "model.json").c_str(), &loaded), RESQ_OK);
  ASSERT_EQ(resq_model_load_calibration(loaded, (dir / "quant.json").c_str()), RESQ_OK);
  size_t layers = 0;
  ASSERT_EQ(resq_model_layer_count(loaded, &layers), RESQ_OK);
  EXPECT_EQ(layers, 2u);
  int bits[4] = {};
  size_t count = 0;
  ASSERT_EQ(resq_model_residual_pool(loaded, 1, bits, 4, &count), RESQ_OK);
  EXPECT_EQ(count, 3u);
  EXPECT_EQ(bits[2], 8);

  resq_clip *c = small_clip(5);
  resq_run_options ro;
  resq_run_options_init(&ro);
  ro.mode = "resq-dynamic";
  ro.period = 3;
  resq_run *r1 = nullptr, *r2 = nullptr;
  ASSERT_EQ(resq_run_sequence(m, c, &ro, &r1), RESQ_OK);
  ASSERT_EQ(resq_run_sequence(loaded, c, &ro, &r2), RESQ_OK);
  double mse1 = 0, mse2 = 0;
  resq_run_output_mse(r1, &mse1);
  resq_run_output_mse(r2, &mse2);
  EXPECT_EQ(mse1, mse2);
  ASSERT_EQ(resq_run_dump_policy(r1, (dir / "maps").c_str()), RESQ_OK);
  EXPECT_TRUE(fs::exists(dir / "maps" / "frame_0001_layer_00.pgm"));
  EXPECT_FALSE(fs::exists(dir / "maps" / "frame_0003_layer_00.pgm"));
  resq_run_free(r1);
  resq_run_free(r2);
  resq_clip_free(c);
  resq_model_free(loaded);
  resq_model_free(m);
  fs::remove_all(dir);
}

TEST(CApi, RunReportsAndOutputs) {
  resq_model *m = calibrated_model("W8A4");
  resq_clip *c = small_clip(2);
  resq_run_options ro;
  resq_run_options_init(&ro);
  ro.mode = "resq-pairwise";
  ro.period = 3;
  resq_run *run = nullptr;
  ASSERT_EQ(resq_run_sequence(m, c, &ro, &run), RESQ_OK);
  size_t frames = 0;
  ASSERT_EQ(resq_run_frame_count(run, &frames), RESQ_OK);
  EXPECT_EQ(frames, 6u);
  double conv = 0, total = 0;
  ASSERT_EQ(resq_run_amortized_bops(run, &conv, &total), RESQ_OK);
  EXPECT_GT(conv, 0.0);
  EXPECT_EQ(conv, total);
  size_t size = 0;
  EXPECT_EQ(resq_run_output(run, 0, nullptr, 0, &size), RESQ_OK);  // size query
  EXPECT_EQ(size, 3u * 12 * 12);
  std::vector<float> out(size);
  EXPECT_EQ(resq_run_output(run, 5, out.data(), out.size(), &size), RESQ_OK);

  const fs::path dir = fs::temp_directory_path() / "resq_capi_run";
  fs::remove_all(dir);
  EXPECT_EQ(resq_run_dump_policy(run, dir.c_str()), RESQ_ERR_INVALID_ARGUMENT);
  ASSERT_EQ(resq_run_write_report(run, (dir / "report.csv").c_str(), 0), RESQ_OK);
  ASSERT_EQ(resq_run_dump_outputs(run, (dir / "out").c_str()), RESQ_OK);
  EXPECT_TRUE(fs::exists(dir / "out" / "frame_0005.rtf"));
  EXPECT_GT(fs::file_size(dir / "report.csv"), 0u);
  resq_run_free(run);
  resq_clip_free(c);
  resq_model_free(m);
  fs::remove_all(dir);
}

TEST(CApi, SessionMatchesBatchRun) {
  resq_model *m = calibrated_model("W8A4");
  resq_clip *c = small_clip(4);
  resq_run_options ro;
  resq_run_options_init(&ro);
  ro.mode = "resq-recurrent";
  ro.period = 4;
  resq_run *run = nullptr;
  ASSERT_EQ(resq_run_sequence(m, c, &ro, &run), RESQ_OK);
  resq_session *s = nullptr;
  ASSERT_EQ(resq_session_create(m, &ro, &s), RESQ_OK);
  resq_model_free(m);  // the session owns a copy

  size_t t = 0, ch = 0, h = 0, w = 0;
  resq_clip_shape(c, &t, &ch, &h, &w);
  std::vector<float> frame(ch * h * w), streamed(3 * h * w), batch(3 * h * w);
  for (size_t i = 0; i < t; ++i) {
    resq_clip_frame(c, i, frame.data(), frame.size());
    size_t size = 0;
    uint64_t bops = 0;
    ASSERT_EQ(resq_session_push(s, frame.data(), ch, h, w, streamed.data(), streamed.size(), &size, &bops), RESQ_OK);
    EXPECT_GT(bops, 0u);
    ASSERT_EQ(resq_run_output(run, i, batch.data(), batch.size(), &size), RESQ_OK);
    EXPECT_EQ(streamed, batch) << "frame " << i;
  }
  resq_session_free(s);
  resq_run_free(run);
  resq_clip_free(c);
}

TEST(CApi, ExperimentRejectsBadConfig) {
  const fs::path dir = fs::temp_directory_path() / "resq_capi_exp";
  EXPECT_EQ(resq_experiment_sweep("{not json", dir.c_str()), RESQ_ERR_PARSE);
  EXPECT_EQ(resq_experiment_sweep(nullptr, dir.c_str()), RESQ_ERR_INVALID_ARGUMENT);
  fs::remove_all(dir);
}

TEST(CApi, FreeAcceptsNull) {
  resq_clip_free(nullptr);
  resq_model_free(nullptr);
  resq_run_free(nullptr);
  resq_session_free(nullptr);
}

}  // namespace
