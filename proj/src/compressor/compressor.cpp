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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "flowsiam/compressor.hpp"
#include "flowsiam/error.hpp"
#include "flowsiam/parallel.hpp"

namespace flowsiam::siamese {
namespace {

using nn::LstmCache;
using nn::Matrix;

// tanh of a nonnegative mean, kept strictly below 1 where double rounding
// would saturate.
double BoundedTanh(double x) {
  return std::min(std::tanh(x), std::nextafter(1.0, 0.0));
}

// Sum in ascending order, independent of member order.
double SortedSum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double v : terms) sum += v;
  return sum;
}

void AddLstm(nn::LstmParams& a, const nn::LstmParams& b) {
  a.w += b.w;
  a.u += b.u;
  a.b += b.b;
}

void InitLstm(nn::LstmParams& p, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.hidden_size));
  nn::InitUniform(p.w, bound, rng);
  nn::InitUniform(p.u, bound, rng);
  nn::InitUniform(p.b, bound, rng);
  for (std::size_t j = 0; j < p.hidden_size; ++j) p.b(p.hidden_size + j, 0) = 1.0;
}

// Activations of one member kept for the backward pass.
struct MemberPass {
  LstmCache enc1;
  LstmCache enc2;
  LstmCache dec1;
  LstmCache dec2;
  Matrix y_hat;
  std::vector<double> latent;
  double rloss = 0.0;
};

MemberPass Forward(const SiameseAutoencoder& model, const FeatureWindow& w) {
  const ModelDims& dims = model.dims;
  Require(w.rows() == dims.steps && w.cols() == dims.d, ErrorCode::kShape,
          "window is " + nn::ShapeString(w) + ", model expects " +
              std::to_string(dims.steps) + "x" + std::to_string(dims.d));
  MemberPass pass;
  pass.enc1 = nn::LstmForward(model.params.enc1, w);
  pass.enc2 = nn::LstmForward(model.params.enc2, pass.enc1.h);
  const auto last = pass.enc2.h.row(dims.steps - 1);
  pass.latent.assign(last.begin(), last.end());
  Matrix repeated(dims.steps, dims.latent);
  for (std::size_t t = 0; t < dims.steps; ++t)
    std::copy(pass.latent.begin(), pass.latent.end(), repeated.row(t).begin());
  pass.dec1 = nn::LstmForward(model.params.dec1, repeated);
  pass.dec2 = nn::LstmForward(model.params.dec2, pass.dec1.h);
  pass.y_hat = nn::LinearForward(model.params.out, pass.dec2.h);
  pass.rloss = RLoss(w, pass.y_hat);
  return pass;
}

}  // namespace

std::size_t DefaultLatentSize(std::size_t h1) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.4 * static_cast<double>(h1))));
}

AutoencoderParams ZeroParams(const ModelDims& dims) {
  AutoencoderParams p;
  p.enc1 = nn::LstmParams(dims.d, dims.h1);
  p.enc2 = nn::LstmParams(dims.h1, dims.latent);
  p.dec1 = nn::LstmParams(dims.latent, dims.h1);
  p.dec2 = nn::LstmParams(dims.h1, dims.h1);
  p.out = nn::LinearParams(dims.h1, dims.d);
  return p;
}

AutoencoderParams& operator+=(AutoencoderParams& a, const AutoencoderParams& b) {
  AddLstm(a.enc1, b.enc1);
  AddLstm(a.enc2, b.enc2);
  AddLstm(a.dec1, b.dec1);
  AddLstm(a.dec2, b.dec2);
  a.out.w += b.out.w;
  a.out.b += b.out.b;
  return a;
}

AutoencoderParams& operator*=(AutoencoderParams& a, double s) {
  for (Matrix* m : Tensors(a)) *m *= s;
  return a;
}

std::vector<std::string> TensorNames() {
  return {"enc1.w", "enc1.u", "enc1.b", "enc2.w", "enc2.u", "enc2.b",
          "dec1.w", "dec1.u", "dec1.b", "dec2.w", "dec2.u", "dec2.b",
          "out.w",  "out.b"};
}

std::vector<Matrix*> Tensors(AutoencoderParams& p) {
  return {&p.enc1.w, &p.enc1.u, &p.enc1.b, &p.enc2.w, &p.enc2.u, &p.enc2.b, &p.dec1.w,
          &p.dec1.u, &p.dec1.b, &p.dec2.w, &p.dec2.u, &p.dec2.b, &p.out.w,  &p.out.b};
}

std::vector<const Matrix*> Tensors(const AutoencoderParams& p) {
  return {&p.enc1.w, &p.enc1.u, &p.enc1.b, &p.enc2.w, &p.enc2.u, &p.enc2.b, &p.dec1.w,
          &p.dec1.u, &p.dec1.b, &p.dec2.w, &p.dec2.u, &p.dec2.b, &p.out.w,  &p.out.b};
}

std::vector<nn::ParamBinding> Bind(AutoencoderParams& params, const AutoencoderParams& grads) {
  static const std::vector<std::string> names = TensorNames();
  const auto p = Tensors(params);
  const auto g = Tensors(grads);
  std::vector<nn::ParamBinding> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back({names[i], p[i], g[i]});
  return out;
}

void ValidateModel(const SiameseAutoencoder& model) {
  const ModelDims& d = model.dims;
  Require(d.d >= 1 && d.h1 >= 1 && d.latent >= 1 && d.steps >= 1, ErrorCode::kShape,
          "model dimensions must be positive");
  Require(d.latent < d.steps * d.d, ErrorCode::kShape,
          "latent size must be smaller than the flattened input T*d");
  const AutoencoderParams ref = ZeroParams(d);
  const auto have = Tensors(model.params);
  const auto want = Tensors(ref);
  const auto names = TensorNames();
  for (std::size_t i = 0; i < have.size(); ++i) {
    Require(have[i]->SameShape(*want[i]), ErrorCode::kShape,
            "tensor " + names[i] + " is " + nn::ShapeString(*have[i]) + ", dims require " +
                nn::ShapeString(*want[i]));
    Require(have[i]->AllFinite(), ErrorCode::kNumeric, "tensor " + names[i] + " is not finite");
  }
  Require(model.feature_spec.size() == d.d, ErrorCode::kShape,
          "feature_spec arity differs from model input size");
  Require(model.normalization.shift.size() == d.d && model.normalization.scale.size() == d.d,
          ErrorCode::kShape, "normalization arity differs from model input size");
}

SiameseAutoencoder MakeModel(const ModelDims& dims, std::uint64_t seed) {
  SiameseAutoencoder model;
  model.dims = dims;
  model.params = ZeroParams(dims);
  if (dims.d != model.feature_spec.size()) {
    model.feature_spec.clear();
    for (std::size_t k = 0; k < dims.d; ++k)
      model.feature_spec.push_back(dims.d == 1 ? std::string("speed")
                                          : std::string(kKnownFeatures[k % kKnownFeatures.size()]));
  }
  model.normalization.shift.assign(dims.d, 0.0);
  model.normalization.scale.assign(dims.d, 1.0);
  std::mt19937_64 rng(seed);
  InitLstm(model.params.enc1, rng);
  InitLstm(model.params.enc2, rng);
  InitLstm(model.params.dec1, rng);
  InitLstm(model.params.dec2, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.h1));
  nn::InitUniform(model.params.out.w, bound, rng);
  nn::InitUniform(model.params.out.b, bound, rng);
  return model;
}

std::vector<double> Encode(const SiameseAutoencoder& model, const FeatureWindow& window) {
  const ModelDims& dims = model.dims;
  Require(window.rows() == dims.steps && window.cols() == dims.d, ErrorCode::kShape,
          "window is " + nn::ShapeString(window) + ", model expects " +
              std::to_string(dims.steps) + "x" + std::to_string(dims.d));
  const LstmCache e1 = nn::LstmForward(model.params.enc1, window);
  const LstmCache e2 = nn::LstmForward(model.params.enc2, e1.h);
  const auto last = e2.h.row(dims.steps - 1);
  return {last.begin(), last.end()};
}

Matrix Decode(const SiameseAutoencoder& model, std::span<const double> latent) {
  const ModelDims& dims = model.dims;
  Require(latent.size() == dims.latent, ErrorCode::kShape,
          "latent has " + std::to_string(latent.size()) + " entries, model expects " +
              std::to_string(dims.latent));
  Matrix repeated(dims.steps, dims.latent);
  for (std::size_t t = 0; t < dims.steps; ++t)
    std::copy(latent.begin(), latent.end(), repeated.row(t).begin());
  const LstmCache d1 = nn::LstmForward(model.params.dec1, repeated);
  const LstmCache d2 = nn::LstmForward(model.params.dec2, d1.h);
  return nn::LinearForward(model.params.out, d2.h);
}

double RLoss(const Matrix& y, const Matrix& y_hat) {
  Require(y.SameShape(y_hat), ErrorCode::kShape,
          "reconstruction shape " + nn::ShapeString(y_hat) + " differs from input " +
              nn::ShapeString(y));
  Require(!y.empty(), ErrorCode::kShape, "reconstruction loss of an empty window");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y.data()[i] - y_hat.data()[i];
    acc += e * e;
  }
  return BoundedTanh(acc / static_cast<double>(y.size()));
}

double Sim(std::span<const double> a, std::span<const double> b) {
  Require(a.size() == b.size(), ErrorCode::kShape, "latent length mismatch");
  Require(!a.empty(), ErrorCode::kShape, "similarity of empty latents");
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double e = a[k] - b[k];
    acc += e * e;
  }
  return BoundedTanh(acc / static_cast<double>(a.size()));
}

LossBreakdown AggregatedLoss(const SiameseAutoencoder& model,
                             std::span<const FeatureWindow> members, double lambda) {
  return AggregatedLossAndGradient(model, members, lambda, nullptr);
}

LossBreakdown AggregatedLossAndGradient(const SiameseAutoencoder& model,
                                        std::span<const FeatureWindow> members,
                                        double lambda, AutoencoderParams* grads) {
  const std::size_t m = members.size();
  Require(m >= 2, ErrorCode::kInvalidArgument, "aggregated loss needs at least two members");
  Require(lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be nonnegative");
  const ModelDims& dims = model.dims;

  std::vector<MemberPass> passes;
  passes.reserve(m);
  for (const auto& w : members) passes.push_back(Forward(model, w));

  const double pair_weight = 2.0 / (static_cast<double>(m) * static_cast<double>(m - 1));
  LossBreakdown loss;
  std::vector<double> rterms;
  rterms.reserve(m);
  for (const auto& p : passes) rterms.push_back(p.rloss);
  loss.mean_rloss = SortedSum(rterms) / static_cast<double>(m);
  std::vector<double> sim_terms;
  sim_terms.reserve(m * (m - 1) / 2);
  std::vector<std::vector<double>> grad_latent(m, std::vector<double>(dims.latent, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double s = Sim(passes[i].latent, passes[j].latent);
      sim_terms.push_back(s);
      if (grads == nullptr) continue;
      const double coeff = lambda * pair_weight * (1.0 - s * s) * 2.0 /
                           static_cast<double>(dims.latent);
      for (std::size_t k = 0; k < dims.latent; ++k) {
        const double g = coeff * (passes[i].latent[k] - passes[j].latent[k]);
        grad_latent[i][k] += g;
        grad_latent[j][k] -= g;
      }
    }
  }
  loss.mean_sim = pair_weight * SortedSum(sim_terms);
  loss.total = loss.mean_rloss + lambda * loss.mean_sim;
  if (grads == nullptr) return loss;

  const double n = static_cast<double>(dims.steps * dims.d);
  for (std::size_t i = 0; i < m; ++i) {
    const MemberPass& p = passes[i];
    const FeatureWindow& y = members[i];
    const double dr = (1.0 - p.rloss * p.rloss) / static_cast<double>(m);
    Matrix grad_y_hat(dims.steps, dims.d);
    for (std::size_t k = 0; k < grad_y_hat.size(); ++k)
      grad_y_hat.data()[k] = dr * 2.0 * (p.y_hat.data()[k] - y.data()[k]) / n;

    const auto g_out = nn::LinearBackward(model.params.out, p.dec2.h, grad_y_hat);
    const auto g_dec2 = nn::LstmBackward(model.params.dec2, p.dec2, g_out.x);
    const auto g_dec1 = nn::LstmBackward(model.params.dec1, p.dec1, g_dec2.x);

    std::vector<double>& dl = grad_latent[i];
    for (std::size_t t = 0; t < dims.steps; ++t) {
      const auto row = g_dec1.x.row(t);
      for (std::size_t k = 0; k < dims.latent; ++k) dl[k] += row[k];
    }
    Matrix grad_h2(dims.steps, dims.latent);
    std::copy(dl.begin(), dl.end(), grad_h2.row(dims.steps - 1).begin());
    const auto g_enc2 = nn::LstmBackward(model.params.enc2, p.enc2, grad_h2);
    const auto g_enc1 = nn::LstmBackward(model.params.enc1, p.enc1, g_enc2.x);

    AddLstm(grads->enc1, g_enc1.params);
    AddLstm(grads->enc2, g_enc2.params);
    AddLstm(grads->dec1, g_dec1.params);
    AddLstm(grads->dec2, g_dec2.params);
    grads->out.w += g_out.params.w;
    grads->out.b += g_out.params.b;
  }
  return loss;
}

std::vector<FeatureWindow> FlowWindows(const SiameseAutoencoder& model, const FleetFlow& flow) {
  std::vector<FeatureWindow> windows;
  windows.reserve(flow.members.size());
  for (const auto& member : flow.members) {
    const Trajectory& t = member.samples.size() == model.dims.steps
                              ? member
                              : ResampleToLength(member, model.dims.steps);
    windows.push_back(ToWindow(t, model.feature_spec, model.normalization));
  }
  return windows;
}

std::vector<std::vector<FeatureWindow>> FlowWindows(const SiameseAutoencoder& model,
                                                    const Dataset& d) {
  std::vector<std::vector<FeatureWindow>> out(d.flows.size());
  ParallelFor(d.flows.size(), [&](std::size_t i) { out[i] = FlowWindows(model, d.flows[i]); });
  return out;
}

TrainResult Train(SiameseAutoencoder model, const Dataset& train, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  ValidateModel(model);
  Require(cfg.lambda >= 0.0, ErrorCode::kInvalidArgument, "lambda must be nonnegative");
  Require(cfg.epochs_max >= 1, ErrorCode::kInvalidArgument, "epochs_max must be >= 1");
  Require(cfg.batch_flows >= 1, ErrorCode::kInvalidArgument, "batch_flows must be >= 1");
  Require(!train.flows.empty(), ErrorCode::kInvalidArgument, "training set is empty");
  for (const auto& f : train.flows) {
    Require(f.label == Label::kNormal, ErrorCode::kInvalidArgument,
            "training input contains abnormal flow '" + f.flow_id +
                "'; training uses normal flows only");
    Require(f.members.size() >= 2, ErrorCode::kInvalidArgument,
            "flow '" + f.flow_id + "' has fewer than two members");
  }

  const auto windows = FlowWindows(model, train);
  const std::size_t n = windows.size();
  nn::AdamState adam;
  adam.options.lr = cfg.lr;
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t e = 0; e < cfg.epochs_max; ++e) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t epoch = model.epochs_trained + 1;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum_total = 0.0;
    double sum_rloss = 0.0;
    double sum_sim = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_flows, ++batch_index) {
      const std::size_t count = std::min(cfg.batch_flows, n - begin);
      std::vector<AutoencoderParams> flow_grads(count);
      std::vector<LossBreakdown> flow_loss(count);
      ParallelFor(count, [&](std::size_t k) {
        flow_grads[k] = ZeroParams(model.dims);
        flow_loss[k] = AggregatedLossAndGradient(model, windows[order[begin + k]], cfg.lambda,
                                                 &flow_grads[k]);
      });
      AutoencoderParams grad = std::move(flow_grads[0]);
      for (std::size_t k = 1; k < count; ++k) grad += flow_grads[k];
      grad *= 1.0 / static_cast<double>(count);
      for (std::size_t k = 0; k < count; ++k) {
        Require(std::isfinite(flow_loss[k].total), ErrorCode::kNumeric,
                "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batch_index));
        sum_total += flow_loss[k].total;
        sum_rloss += flow_loss[k].mean_rloss;
        sum_sim += flow_loss[k].mean_sim;
      }
      auto tensors = Tensors(grad);
      nn::ClipGlobalNorm(tensors, cfg.clip_norm);
      const auto bindings = Bind(model.params, grad);
      nn::AdamStep(bindings, adam);
    }
    model.epochs_trained = epoch;
    TrainLogRecord rec;
    rec.epoch = epoch;
    rec.total = sum_total / static_cast<double>(n);
    rec.rloss = sum_rloss / static_cast<double>(n);
    rec.sim = sum_sim / static_cast<double>(n);
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.total < best - cfg.min_delta) {
      best = rec.total;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  result.model = std::move(model);
  return result;
}

void WriteTrainLogCsv(std::span<const TrainLogRecord> log, std::ostream& out,
                      bool with_header) {
  if (with_header) out << "epoch,rloss,sim,total,seconds\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : log)
    out << r.epoch << ',' << r.rloss << ',' << r.sim << ',' << r.total << ',' << r.seconds
        << '\n';
  out.precision(old_precision);
}

}  // namespace flowsiam::siamese
