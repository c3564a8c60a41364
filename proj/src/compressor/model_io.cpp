/*
 * Copyright 2026 The flowsiam Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <fstream>
#include <sstream>

#include "flowsiam/compressor.hpp"
#include "flowsiam/error.hpp"
#include "json.hpp"

namespace flowsiam::siamese {
namespace {

using nlohmann::json;

constexpr const char* kModelFormat = "flowsiam-model";
constexpr int kModelVersion = 1;

json MatrixToJson(const nn::Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

void MatrixFromJson(const json& j, const std::string& name, nn::Matrix& m) {
  Require(j.is_array() && j.size() == m.rows(), ErrorCode::kShape,
          "tensor " + name + ": expected " + std::to_string(m.rows()) + " rows");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const json& row = j[r];
    Require(row.is_array() && row.size() == m.cols(), ErrorCode::kShape,
            "tensor " + name + " row " + std::to_string(r) + ": expected " +
                std::to_string(m.cols()) + " columns");
    for (std::size_t c = 0; c < m.cols(); ++c) {
      Require(row[c].is_number(), ErrorCode::kParse,
              "tensor " + name + " has a non-numeric entry");
      m(r, c) = row[c].get<double>();
    }
  }
}

const json& Field(const json& j, const char* key) {
  Require(j.is_object() && j.contains(key), ErrorCode::kParse,
          std::string("model file: missing field '") + key + "'");
  return j.at(key);
}

}  // namespace

std::string ModelToJson(const SiameseAutoencoder& model) {
  json tensors = json::object();
  const auto names = TensorNames();
  const auto values = Tensors(model.params);
  for (std::size_t i = 0; i < names.size(); ++i) tensors[names[i]] = MatrixToJson(*values[i]);
  json doc = {{"format", kModelFormat},
              {"format_version", kModelVersion},
              {"dims",
               {{"d", model.dims.d},
                {"h1", model.dims.h1},
                {"L", model.dims.latent},
                {"T", model.dims.steps}}},
              {"feature_spec", model.feature_spec},
              {"normalization",
               {{"shift", model.normalization.shift}, {"scale", model.normalization.scale}}},
              {"epochs_trained", model.epochs_trained},
              {"tensors", tensors}};
  return doc.dump() + "\n";
}

SiameseAutoencoder ModelFromJson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParse, std::string("model file is not valid JSON: ") + e.what());
  }
  Require(doc.is_object(), ErrorCode::kParse, "model file must be a JSON object");
  if (doc.contains("format"))
    Require(doc["format"] == kModelFormat, ErrorCode::kParse, "not a flowsiam model file");
  const json& version = Field(doc, "format_version");
  Require(version.is_number_integer(), ErrorCode::kParse, "format_version must be an integer");
  Require(version.get<int>() == kModelVersion, ErrorCode::kVersion,
          "unsupported model format_version " + version.dump() + " (expected " +
              std::to_string(kModelVersion) + ")");
  SiameseAutoencoder model;
  try {
    const json& dims = Field(doc, "dims");
    model.dims.d = Field(dims, "d").get<std::size_t>();
    model.dims.h1 = Field(dims, "h1").get<std::size_t>();
    model.dims.latent = Field(dims, "L").get<std::size_t>();
    model.dims.steps = Field(dims, "T").get<std::size_t>();
    model.feature_spec = Field(doc, "feature_spec").get<FeatureSpec>();
    const json& norm = Field(doc, "normalization");
    model.normalization.shift = Field(norm, "shift").get<std::vector<double>>();
    model.normalization.scale = Field(norm, "scale").get<std::vector<double>>();
    if (doc.contains("epochs_trained"))
      model.epochs_trained = doc["epochs_trained"].get<std::size_t>();
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParse, std::string("model file: ") + e.what());
  }
  Require(model.dims.d >= 1 && model.dims.h1 >= 1 && model.dims.latent >= 1 &&
              model.dims.steps >= 1,
          ErrorCode::kShape, "model dimensions must be positive");
  model.params = ZeroParams(model.dims);
  const json& tensors = Field(doc, "tensors");
  const auto names = TensorNames();
  const auto values = Tensors(model.params);
  for (std::size_t i = 0; i < names.size(); ++i) {
    Require(tensors.contains(names[i]), ErrorCode::kParse,
            "model file: missing tensor '" + names[i] + "'");
    MatrixFromJson(tensors[names[i]], names[i], *values[i]);
  }
  ValidateModel(model);
  return model;
}

void SaveModel(const SiameseAutoencoder& model, const std::string& path) {
  ValidateModel(model);
  const std::string text = ModelToJson(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << text;
  Require(static_cast<bool>(out), ErrorCode::kIo, "failed writing '" + path + "'");
}

SiameseAutoencoder LoadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ModelFromJson(buf.str());
}

}  // namespace flowsiam::siamese
