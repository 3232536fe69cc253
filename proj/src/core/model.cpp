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

#include "resq/model.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "resq/errors.hpp"

namespace resq {

const QuantizerPool &LayerQuantConfig::pool() const {
  if (!has_pool()) throw InvalidArgument("layer has no residual quantizer pool");
  return std::get<QuantizerPool>(residual_act);
}

const QuantParams &LayerQuantConfig::static_residual_act() const {
  if (has_pool()) return std::get<QuantizerPool>(residual_act).highest();
  return std::get<QuantParams>(residual_act);
}

std::vector<Shape> ModelSpec::activation_shapes(const Shape &input) const {
  if (input.size() != 3) throw DimensionError("model input must be (C, H, W), got " + shape_to_string(input));
  std::vector<Shape> shapes;
  Shape cur = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor &w = layers[l].weights;
    if (w.rank() != 4) throw DimensionError("layer " + std::to_string(l) + " weights must be rank 4");
    if (w.extent(1) != cur[0]) {
      throw DimensionError("layer " + std::to_string(l) + " expects " + std::to_string(w.extent(1)) +
                           " input channels, got " + std::to_string(cur[0]));
    }
    const std::size_t p = layers[l].padding;
    if (w.extent(2) > cur[1] + 2 * p || w.extent(3) > cur[2] + 2 * p) {
      throw DimensionError("layer " + std::to_string(l) + " kernel larger than padded input");
    }
    cur = {w.extent(0), cur[1] + 2 * p - w.extent(2) + 1, cur[2] + 2 * p - w.extent(3) + 1};
    shapes.push_back(cur);
  }
  return shapes;
}

ModelSpec ModelSpec::full_precision() const {
  ModelSpec out = *this;
  for (auto &l : out.layers) l.quant = LayerQuantConfig{};
  return out;
}

ModelSpec ModelSpec::prefix(std::size_t n_layers) const {
  if (n_layers > layers.size()) throw InvalidArgument("prefix longer than model");
  ModelSpec out;
  out.layers.assign(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(n_layers));
  return out;
}

Tensor apply_nonlinearity(const Tensor &z, Nonlinearity nl) { return nl == Nonlinearity::Relu ? relu(z) : z; }

namespace {

std::string to_string(Nonlinearity nl) { return nl == Nonlinearity::Relu ? "relu" : "none"; }

Nonlinearity parse_nonlinearity(const std::string &s) {
  if (s == "relu") return Nonlinearity::Relu;
  if (s == "none") return Nonlinearity::None;
  throw ParseError("unknown nonlinearity '" + s + "'");
}

nlohmann::json read_json(const std::filesystem::path &path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

void save_model(const ModelSpec &model, const std::filesystem::path &json_path) {
  nlohmann::json doc;
  doc["layers"] = nlohmann::json::array();
  const auto stem = json_path.stem().string();
  if (json_path.has_parent_path()) std::filesystem::create_directories(json_path.parent_path());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto &layer = model.layers[l];
    const std::string file = stem + ".layer" + std::to_string(l) + ".rtf";
    write_rtf(json_path.parent_path() / file, layer.weights);
    doc["layers"].push_back({{"weights", file}, {"padding", layer.padding}, {"nonlinearity", to_string(layer.nonlinearity)}});
  }
  std::ofstream f(json_path);
  if (!f) throw IoError("cannot open " + json_path.string() + " for writing");
  f << doc.dump(2) << '\n';
}

ModelSpec load_model(const std::filesystem::path &json_path) {
  const auto doc = read_json(json_path);
  ModelSpec model;
  try {
    for (const auto &entry : doc.at("layers")) {
      Layer layer;
      layer.weights = read_rtf(json_path.parent_path() / entry.at("weights").get<std::string>());
      layer.padding = entry.value("padding", std::size_t{0});
      layer.nonlinearity = parse_nonlinearity(entry.value("nonlinearity", std::string("none")));
      model.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(json_path.string() + ": " + e.what());
  }
  if (model.layers.empty()) throw ParseError(json_path.string() + ": model has no layers");
  return model;
}

nlohmann::json quant_config_to_json(const ModelSpec &model) {
  nlohmann::json doc;
  doc["layers"] = nlohmann::json::array();
  for (const auto &layer : model.layers) {
    const auto &q = layer.quant;
    nlohmann::json entry = {
        {"keyframe_weight", q.keyframe_weight}, {"keyframe_act", q.keyframe_act}, {"residual_weight", q.residual_weight}};
    if (q.has_pool()) {
      auto pool = nlohmann::json::array();
      for (const auto &e : q.pool().entries()) pool.push_back(e);
      entry["residual_pool"] = std::move(pool);
    } else {
      entry["residual_act"] = q.static_residual_act();
    }
    doc["layers"].push_back(std::move(entry));
  }
  return doc;
}

void apply_quant_config(ModelSpec &model, const nlohmann::json &doc) {
  try {
    const auto &layers = doc.at("layers");
    if (layers.size() != model.layers.size()) {
      throw ParseError("calibration has " + std::to_string(layers.size()) + " layers, model has " +
                       std::to_string(model.layers.size()));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto &entry = layers[l];
      LayerQuantConfig q;
      q.keyframe_weight = entry.at("keyframe_weight").get<QuantParams>();
      q.keyframe_act = entry.at("keyframe_act").get<QuantParams>();
      q.residual_weight = entry.at("residual_weight").get<QuantParams>();
      if (entry.contains("residual_pool")) {
        q.residual_act = QuantizerPool(entry.at("residual_pool").get<std::vector<QuantParams>>());
      } else {
        q.residual_act = entry.at("residual_act").get<QuantParams>();
      }
      model.layers[l].quant = std::move(q);
    }
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("malformed calibration document: ") + e.what());
  }
}

}  // namespace resq
