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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <utility>

#include "doctest.h"
#include "flowsiam/compressor.hpp"
#include "flowsiam/parallel.hpp"
#include "flowsiam/simgen.hpp"
#include "json.hpp"
#include "helpers.hpp"

using namespace flowsiam;
using namespace flowsiam::siamese;
using flowsiam::testing::CodeOf;
using nn::Matrix;

namespace {

Matrix RandomWindow(std::size_t t, std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(t, d);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

// (1/m) sum r_i + lambda * mean over unordered pairs of s_ij.
double ComposeLoss(const std::vector<double>& rloss, const std::vector<std::vector<double>>& sim,
                   double lambda) {
  const double m = static_cast<double>(rloss.size());
  double r = 0.0;
  for (double v : rloss) r += v;
  double s = 0.0;
  for (std::size_t i = 0; i < rloss.size(); ++i)
    for (std::size_t j = i + 1; j < rloss.size(); ++j) s += sim[i][j];
  return r / m + lambda * 2.0 / (m * (m - 1.0)) * s;
}

double ManualLoss(const SiameseAutoencoder& model, const std::vector<Matrix>& w, double lambda) {
  std::vector<double> r;
  std::vector<std::vector<double>> latents;
  for (const auto& x : w) {
    latents.push_back(Encode(model, x));
    const Matrix y = Decode(model, latents.back());
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) sq += (x.data()[k] - y.data()[k]) * (x.data()[k] - y.data()[k]);
    r.push_back(std::tanh(sq / static_cast<double>(x.size())));
  }
  std::vector<std::vector<double>> s(w.size(), std::vector<double>(w.size(), 0.0));
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < latents[i].size(); ++k)
        sq += (latents[i][k] - latents[j][k]) * (latents[i][k] - latents[j][k]);
      s[i][j] = std::tanh(sq / static_cast<double>(latents[i].size()));
    }
  return ComposeLoss(r, s, lambda);
}

Dataset SmallCorpus(std::size_t flows, std::uint64_t seed) {
  sim::GeneratorConfig cfg;
  cfg.seed = seed;
  cfg.flows = flows;
  cfg.fleet_size = 3;
  cfg.steps = 12;
  cfg.feature_spec = {"speed"};
  Dataset d = sim::GenerateDataset(cfg);
  d.normalization = FitNormalizer(d);
  return d;
}

SiameseAutoencoder SmallModel(const Dataset& d, std::uint64_t seed) {
  auto model = MakeModel({1, 6, 2, d.steps}, seed);
  model.feature_spec = d.feature_spec;
  model.normalization = *d.normalization;
  return model;
}

}  // namespace

TEST_SUITE("compressor") {
  TEST_CASE("reconstruction loss examples") {
    const auto y = Matrix::FromRows({{1.0, 0.0}});
    CHECK(RLoss(y, y) == 0.0);
    CHECK(RLoss(y, Matrix(1, 2)) == doctest::Approx(0.462117).epsilon(1e-6));
    const double big = RLoss(Matrix::FromRows({{2.0}}), Matrix(1, 1));
    CHECK(big == doctest::Approx(0.999329).epsilon(1e-6));
    CHECK(big < 1.0);
    CHECK(RLoss(Matrix::FromRows({{1e6}}), Matrix(1, 1)) < 1.0);
    CHECK(Sim(std::vector<double>{1e6}, std::vector<double>{0.0}) < 1.0);
    CHECK(CodeOf([&] { RLoss(y, Matrix(2, 1)); }) == ErrorCode::kShape);
  }

  TEST_CASE("latent similarity examples") {
    const std::vector<double> a{1.0, 1.0}, b{0.0, 0.0};
    CHECK(Sim(a, a) == 0.0);
    CHECK(Sim(a, b) == doctest::Approx(0.761594).epsilon(1e-6));
    CHECK(Sim(a, b) == Sim(b, a));
    const std::vector<double> c{1.0};
    CHECK(CodeOf([&] { Sim(a, c); }) == ErrorCode::kShape);
  }

  TEST_CASE("aggregated loss composition") {
    CHECK(ComposeLoss({0.4, 0.4}, {{0, 0.2}, {0.2, 0}}, 1.0) == doctest::Approx(0.6));
    std::mt19937_64 rng(2);
    const auto model = MakeModel({2, 5, 3, 6}, 11);
    std::vector<Matrix> w;
    for (int i = 0; i < 4; ++i) w.push_back(RandomWindow(6, 2, rng));
    for (double lambda : {0.0, 0.5, 1.0}) {
      const auto loss = AggregatedLoss(model, w, lambda);
      CHECK(loss.total == doctest::Approx(ManualLoss(model, w, lambda)).epsilon(1e-12));
      CHECK(loss.total == doctest::Approx(loss.mean_rloss + lambda * loss.mean_sim).epsilon(1e-12));
    }
    CHECK(AggregatedLoss(model, w, 0.0).total == AggregatedLoss(model, w, 0.0).mean_rloss);

    std::vector<Matrix> shuffled{w[2], w[0], w[3], w[1]};
    CHECK(AggregatedLoss(model, shuffled, 1.0).total == AggregatedLoss(model, w, 1.0).total);

    std::vector<Matrix> twins{w[0], w[0]};
    const auto t = AggregatedLoss(model, twins, 1.0);
    CHECK(t.mean_sim == 0.0);
    CHECK(Encode(model, w[0]) == Encode(model, twins[1]));
    CHECK(CodeOf([&] { AggregatedLoss(model, std::span(w).first(1), 1.0); }) ==
          ErrorCode::kInvalidArgument);
  }

  TEST_CASE("zero-weight model") {
    const ModelDims dims{2, 4, 3, 5};
    SiameseAutoencoder model = MakeModel(dims, 1);
    model.params = ZeroParams(dims);
    model.params.out.b(0, 0) = 0.25;
    model.params.out.b(1, 0) = -0.5;
    std::mt19937_64 rng(1);
    const auto latent = Encode(model, RandomWindow(5, 2, rng));
    CHECK(latent == std::vector<double>(3, 0.0));
    const Matrix y = Decode(model, latent);
    CHECK(y.rows() == 5);
    CHECK(y.cols() == 2);
    for (std::size_t t = 0; t < 5; ++t) {
      CHECK(y(t, 0) == 0.25);
      CHECK(y(t, 1) == -0.5);
    }
  }

  TEST_CASE("latents lie strictly inside (-1, 1)") {
    std::mt19937_64 rng(6);
    const auto model = MakeModel({3, 8, 4, 10}, 3);
    for (int i = 0; i < 20; ++i) {
      Matrix w = RandomWindow(10, 3, rng);
      for (auto& v : w.values()) v *= 50.0;
      for (double z : Encode(model, w)) {
        CHECK(z > -1.0);
        CHECK(z < 1.0);
      }
    }
    CHECK(CodeOf([&] { Encode(model, Matrix(9, 3)); }) == ErrorCode::kShape);
    CHECK(CodeOf([&] { Decode(model, std::vector<double>(3)); }) == ErrorCode::kShape);
  }

  TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(17);
    for (double lambda : {0.0, 1.0, 2.5}) {
      SiameseAutoencoder model = MakeModel({2, 3, 2, 4}, 5 + static_cast<std::uint64_t>(lambda));
      std::vector<Matrix> w{RandomWindow(4, 2, rng), RandomWindow(4, 2, rng)};
      AutoencoderParams grads = ZeroParams(model.dims);
      const double value = AggregatedLossAndGradient(model, w, lambda, &grads).total;
      CHECK(value == doctest::Approx(AggregatedLoss(model, w, lambda).total).epsilon(1e-14));

      auto params = Tensors(model.params);
      const auto analytic = Tensors(std::as_const(grads));
      const auto names = TensorNames();
      const double h = 1e-5;
      double worst = 0.0;
      for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t k = 0; k < params[p]->size(); ++k) {
          double& x = params[p]->data()[k];
          const double saved = x;
          x = saved + h;
          const double up = AggregatedLoss(model, w, lambda).total;
          x = saved - h;
          const double down = AggregatedLoss(model, w, lambda).total;
          x = saved;
          const double numeric = (up - down) / (2 * h);
          const double a = analytic[p]->data()[k];
          const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
          if (rel > worst) worst = rel;
          if (rel > 1e-4) INFO(names[p], "[", k, "] analytic ", a, " numeric ", numeric);
          CHECK(rel <= 1e-4);
        }
      }
      MESSAGE("lambda ", lambda, " worst relative error ", worst);
    }
  }

  TEST_CASE("gradients accumulate into the output") {
    std::mt19937_64 rng(9);
    const auto model = MakeModel({2, 3, 2, 4}, 2);
    std::vector<Matrix> w{RandomWindow(4, 2, rng), RandomWindow(4, 2, rng), RandomWindow(4, 2, rng)};
    AutoencoderParams once = ZeroParams(model.dims);
    AggregatedLossAndGradient(model, w, 1.0, &once);
    AutoencoderParams twice = ZeroParams(model.dims);
    AggregatedLossAndGradient(model, w, 1.0, &twice);
    AggregatedLossAndGradient(model, w, 1.0, &twice);
    AutoencoderParams doubled = once;
    doubled *= 2.0;
    const auto a = Tensors(std::as_const(twice));
    const auto b = Tensors(std::as_const(doubled));
    for (std::size_t p = 0; p < a.size(); ++p)
      for (std::size_t k = 0; k < a[p]->size(); ++k)
        CHECK(a[p]->data()[k] == doctest::Approx(b[p]->data()[k]).epsilon(1e-12));
  }

  TEST_CASE("training lowers the loss and is deterministic") {
    const Dataset d = SmallCorpus(12, 4);
    TrainConfig cfg;
    cfg.epochs_max = 25;
    cfg.batch_flows = 4;
    cfg.lr = 1e-2;
    cfg.seed = 8;
    cfg.patience = 100;
    std::size_t callbacks = 0;
    const auto a = Train(SmallModel(d, 3), d, cfg, [&](const TrainLogRecord&) { ++callbacks; });
    CHECK(callbacks == 25);
    REQUIRE(a.log.size() == 25);
    CHECK(a.log.back().total < 0.5 * a.log.front().total);
    CHECK(a.model.epochs_trained == 25);
    for (const auto& r : a.log) {
      CHECK(r.rloss >= 0.0);
      CHECK(r.rloss < 1.0);
      CHECK(r.sim >= 0.0);
      CHECK(r.sim < 1.0);
      CHECK(std::isfinite(r.total));
    }
    const auto b = Train(SmallModel(d, 3), d, cfg);
    CHECK(a.model == b.model);
    SetMaxThreads(3);
    const auto c = Train(SmallModel(d, 3), d, cfg);
    SetMaxThreads(0);
    CHECK(a.model == c.model);
  }

  TEST_CASE("early stopping") {
    const Dataset d = SmallCorpus(4, 5);
    TrainConfig cfg;
    cfg.epochs_max = 200;
    cfg.batch_flows = 4;
    cfg.patience = 2;
    cfg.min_delta = 10.0;
    const auto r = Train(SmallModel(d, 1), d, cfg);
    CHECK(r.early_stopped);
    CHECK(r.log.size() == 3);
  }

  TEST_CASE("training rejects abnormal flows and bad settings") {
    Dataset d = SmallCorpus(3, 6);
    TrainConfig cfg;
    cfg.epochs_max = 1;
    auto bad = d;
    bad.flows[1].label = Label::kAbnormal;
    CHECK(CodeOf([&] { Train(SmallModel(d, 1), bad, cfg); }) == ErrorCode::kInvalidArgument);
    cfg.lambda = -1.0;
    CHECK(CodeOf([&] { Train(SmallModel(d, 1), d, cfg); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("the similarity term pulls latents together") {
    const Dataset d = SmallCorpus(12, 12);
    TrainConfig cfg;
    cfg.epochs_max = 30;
    cfg.batch_flows = 4;
    cfg.lr = 1e-2;
    cfg.patience = 100;
    cfg.lambda = 0.0;
    const auto free = Train(SmallModel(d, 7), d, cfg);
    cfg.lambda = 1.0;
    const auto tied = Train(SmallModel(d, 7), d, cfg);
    CHECK(tied.log.back().sim < free.log.back().sim);
  }

  TEST_CASE("training log CSV") {
    std::vector<TrainLogRecord> log{{1, 0.5, 0.25, 0.75, 0.125}, {2, 0.1, 0.2, 0.3, 1.0}};
    std::ostringstream out;
    WriteTrainLogCsv(log, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,rloss,sim,total,seconds");
    std::getline(in, line);
    CHECK(line.rfind("1,0.5,0.25,0.75,", 0) == 0);
    std::ostringstream bare;
    WriteTrainLogCsv(log, bare, false);
    CHECK(bare.str().rfind("1,", 0) == 0);
  }

  TEST_CASE("model files") {
    CHECK(DefaultLatentSize(32) == 13);
    CHECK(DefaultLatentSize(8) == 3);
    auto model = MakeModel({3, 8, 4, 60}, 77);
    model.normalization = Normalization{{1.0 / 3, 2.5, -7.0}, {0.1, 1e-3, 12.0}};
    model.epochs_trained = 9;
    const std::string text = ModelToJson(model);
    const auto back = ModelFromJson(text);
    CHECK(back == model);
    CHECK(back.dims == ModelDims{3, 8, 4, 60});
    std::mt19937_64 rng(1);
    const Matrix probe = RandomWindow(60, 3, rng);
    CHECK(Encode(back, probe) == Encode(model, probe));

    const auto dir = flowsiam::testing::ScratchDir("compressor_io");
    const std::string path = (dir / "m.json").string();
    SaveModel(model, path);
    CHECK(LoadModel(path) == model);
    {
      std::ofstream cut(path, std::ios::trunc);
      cut << text.substr(0, text.size() / 3);
    }
    CHECK(CodeOf([&] { LoadModel(path); }) == ErrorCode::kParse);
    CHECK(CodeOf([&] { LoadModel((dir / "missing.json").string()); }) == ErrorCode::kIo);

    auto doc = nlohmann::json::parse(text);
    doc["format_version"] = 2;
    CHECK(CodeOf([&] { ModelFromJson(doc.dump()); }) == ErrorCode::kVersion);
    doc = nlohmann::json::parse(text);
    doc["dims"]["h1"] = 9;
    CHECK(CodeOf([&] { ModelFromJson(doc.dump()); }) == ErrorCode::kShape);

    model.params.enc1.w(0, 0) = std::nan("");
    CHECK(CodeOf([&] { SaveModel(model, path); }) == ErrorCode::kNumeric);
  }
}
