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

// Weight-shared LSTM autoencoder applied to every member of a fleet. Training
// minimises mean reconstruction loss plus lambda times the mean pairwise
// latent distance over normal fleets only.

#ifndef FLOWSIAM_COMPRESSOR_HPP_
#define FLOWSIAM_COMPRESSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flowsiam/core.hpp"
#include "flowsiam/neuralnet.hpp"

namespace flowsiam::siamese {

struct ModelDims {
  std::size_t d = 3;        // features per step
  std::size_t h1 = 32;      // hidden width of enc1, dec1, dec2
  std::size_t latent = 13;  // L, width of enc2
  std::size_t steps = 60;   // T

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// round(0.4 * h1): the latent keeps 40% of the hidden width.
std::size_t DefaultLatentSize(std::size_t h1);

// enc1: d -> h1, enc2: h1 -> L, dec1: L -> h1, dec2: h1 -> h1, out: h1 -> d.
// Also used for gradients, which have identical shapes.
struct AutoencoderParams {
  nn::LstmParams enc1;
  nn::LstmParams enc2;
  nn::LstmParams dec1;
  nn::LstmParams dec2;
  nn::LinearParams out;

  friend bool operator==(const AutoencoderParams&, const AutoencoderParams&) = default;
};

AutoencoderParams ZeroParams(const ModelDims& dims);
AutoencoderParams& operator+=(AutoencoderParams& a, const AutoencoderParams& b);
AutoencoderParams& operator*=(AutoencoderParams& a, double s);

// Every tensor in a fixed order, with stable names such as "enc1.w".
std::vector<std::string> TensorNames();
std::vector<nn::Matrix*> Tensors(AutoencoderParams& p);
std::vector<const nn::Matrix*> Tensors(const AutoencoderParams& p);
std::vector<nn::ParamBinding> Bind(AutoencoderParams& params, const AutoencoderParams& grads);

struct SiameseAutoencoder {
  ModelDims dims;
  AutoencoderParams params;
  FeatureSpec feature_spec = DefaultFeatureSpec();
  Normalization normalization;
  std::size_t epochs_trained = 0;

  friend bool operator==(const SiameseAutoencoder&, const SiameseAutoencoder&) = default;
};

void ValidateModel(const SiameseAutoencoder& model);

// Uniform in +-1/sqrt(fan) per tensor, forget-gate bias set to 1.
SiameseAutoencoder MakeModel(const ModelDims& dims, std::uint64_t seed);

// Latent = final hidden state of enc2 after enc1 -> enc2 over the window.
std::vector<double> Encode(const SiameseAutoencoder& model, const FeatureWindow& window);
// The latent is repeated T times as decoder input; dec1 -> dec2 -> out.
nn::Matrix Decode(const SiameseAutoencoder& model, std::span<const double> latent);

// tanh of the mean squared error over all T*d entries.
double RLoss(const nn::Matrix& y, const nn::Matrix& y_hat);
// tanh of the mean squared difference between two latents.
double Sim(std::span<const double> a, std::span<const double> b);

struct LossBreakdown {
  double total = 0.0;
  double mean_rloss = 0.0;
  double mean_sim = 0.0;
};

// (1/m) sum RLoss_i + (2 lambda / (m (m-1))) sum_{i<j} Sim(L_i, L_j).
LossBreakdown AggregatedLoss(const SiameseAutoencoder& model,
                             std::span<const FeatureWindow> members, double lambda);

// Same value; gradients with respect to every parameter are added to *grads.
LossBreakdown AggregatedLossAndGradient(const SiameseAutoencoder& model,
                                        std::span<const FeatureWindow> members,
                                        double lambda, AutoencoderParams* grads);

// Windows of every member of every flow, resampled to dims.steps and mapped
// through the model's normalisation.
std::vector<std::vector<FeatureWindow>> FlowWindows(const SiameseAutoencoder& model,
                                                    const Dataset& d);
std::vector<FeatureWindow> FlowWindows(const SiameseAutoencoder& model, const FleetFlow& flow);

struct TrainConfig {
  double lambda = 1.0;
  std::size_t epochs_max = 300;
  std::size_t batch_flows = 10;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::size_t patience = 20;
  double min_delta = 1e-4;
  double clip_norm = 5.0;
};

struct TrainLogRecord {
  std::size_t epoch = 0;
  double rloss = 0.0;
  double sim = 0.0;
  double total = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  SiameseAutoencoder model;
  std::vector<TrainLogRecord> log;
  bool early_stopped = false;
};

using EpochCallback = std::function<void(const TrainLogRecord&)>;

// Mini-batch training over whole flows. Per-flow gradients are computed in
// parallel and summed in flow order, so results do not depend on the thread
// count. Stops at epochs_max or when the epoch loss has not improved by
// min_delta for `patience` epochs.
TrainResult Train(SiameseAutoencoder model, const Dataset& train, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

void WriteTrainLogCsv(std::span<const TrainLogRecord> log, std::ostream& out,
                      bool with_header = true);

std::string ModelToJson(const SiameseAutoencoder& model);
SiameseAutoencoder ModelFromJson(const std::string& text);
void SaveModel(const SiameseAutoencoder& model, const std::string& path);
SiameseAutoencoder LoadModel(const std::string& path);

}  // namespace flowsiam::siamese

#endif  // FLOWSIAM_COMPRESSOR_HPP_
