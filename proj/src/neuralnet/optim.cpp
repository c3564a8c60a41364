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
#include <cmath>
#include <numeric>
#include <random>

#include "flowsiam/error.hpp"
#include "flowsiam/neuralnet.hpp"

namespace flowsiam::nn {

void AdamStep(std::span<const ParamBinding> bindings, AdamState& state) {
  for (const auto& b : bindings) {
    Require(b.param != nullptr && b.grad != nullptr, ErrorCode::kInvalidArgument,
            "Adam binding without tensors");
    Require(b.param->SameShape(*b.grad), ErrorCode::kShape,
            "Adam: gradient shape mismatch for " + std::string(b.name));
    Require(b.grad->AllFinite(), ErrorCode::kNumeric,
            "Adam: non-finite gradient in tensor " + std::string(b.name));
  }
  if (state.first_moment.empty()) {
    for (const auto& b : bindings) {
      state.first_moment.emplace_back(b.param->rows(), b.param->cols());
      state.second_moment.emplace_back(b.param->rows(), b.param->cols());
    }
  }
  Require(state.first_moment.size() == bindings.size(), ErrorCode::kState,
          "Adam state does not match parameter list");
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    Require(state.first_moment[i].SameShape(*bindings[i].param), ErrorCode::kState,
            "Adam moment shape mismatch for " + std::string(bindings[i].name));
  }

  const AdamOptions& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    double* p = bindings[i].param->data();
    const double* g = bindings[i].grad->data();
    double* m = state.first_moment[i].data();
    double* v = state.second_moment[i].data();
    const std::size_t n = bindings[i].param->size();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= o.lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

double ClipGlobalNorm(std::span<Matrix* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix* g : grads)
    for (double v : g->values()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Matrix* g : grads) *g *= scale;
  }
  return norm;
}

GradCheckReport GradCheck(const std::function<double()>& loss,
                          std::span<const ParamBinding> bindings,
                          const GradCheckOptions& options) {
  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (const auto& b : bindings) {
    Require(b.param->SameShape(*b.grad), ErrorCode::kShape,
            "grad check: gradient shape mismatch for " + std::string(b.name));
    std::vector<std::size_t> coords(b.param->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor > 0 &&
        coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    double* p = b.param->data();
    for (std::size_t k : coords) {
      const double saved = p[k];
      p[k] = saved + options.step;
      const double plus = loss();
      p[k] = saved - options.step;
      const double minus = loss();
      p[k] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = b.grad->data()[k];
      const double denom = std::max({std::abs(analytic), std::abs(numeric),
                                     options.denominator_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_error || report.worst_tensor.empty()) {
        if (rel >= report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_tensor = std::string(b.name);
          report.worst_index = k;
          report.worst_analytic = analytic;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace flowsiam::nn
