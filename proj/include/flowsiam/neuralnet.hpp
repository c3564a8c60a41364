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

// Dense numeric kernel for the autoencoder: row-major matrices, LSTM and
// linear layers with exact backward passes, Adam, and finite-difference
// gradient checking. Everything is 64-bit and deterministic.

#ifndef FLOWSIAM_NEURALNET_HPP_
#define FLOWSIAM_NEURALNET_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowsiam::nn {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix FromRows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix Column(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  void Fill(double v);
  bool SameShape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool AllFinite() const;
  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string ShapeString(const Matrix& m);

// Activations and their derivatives with respect to the input.
inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double SigmoidDerivative(double x) {
  const double s = Sigmoid(x);
  return s * (1.0 - s);
}
inline double Tanh(double x) { return std::tanh(x); }
inline double TanhDerivative(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

// Uniform in [-bound, bound].
void InitUniform(Matrix& m, double bound, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// LSTM

// Gate blocks are packed in the order input, forget, cell, output; each block
// spans hidden_size rows of w, u and b.
struct LstmParams {
  LstmParams() = default;
  LstmParams(std::size_t input_size, std::size_t hidden_size);

  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  Matrix w;  // 4H x d_in
  Matrix u;  // 4H x H
  Matrix b;  // 4H x 1

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

// Per-step activations retained for backpropagation through time.
struct LstmCache {
  Matrix x;       // T x d_in
  Matrix gates;   // T x 4H, post-activation (i, f, g, o)
  Matrix c;       // T x H
  Matrix tanh_c;  // T x H
  Matrix h;       // T x H, the layer output
  std::vector<double> h0;
  std::vector<double> c0;
};

// Empty h0 / c0 mean zero initial state.
LstmCache LstmForward(const LstmParams& p, const Matrix& x,
                      std::span<const double> h0 = {},
                      std::span<const double> c0 = {});

struct LstmGradients {
  LstmParams params;
  Matrix x;
  std::vector<double> h0;
  std::vector<double> c0;
};

LstmGradients LstmBackward(const LstmParams& p, const LstmCache& cache,
                           const Matrix& grad_h);

// ---------------------------------------------------------------------------
// Linear

struct LinearParams {
  LinearParams() = default;
  LinearParams(std::size_t input_size, std::size_t output_size);

  Matrix w;  // d_out x d_in
  Matrix b;  // d_out x 1

  std::size_t input_size() const { return w.cols(); }
  std::size_t output_size() const { return w.rows(); }

  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

// Applies y_t = W x_t + b to every row of x (T x d_in).
Matrix LinearForward(const LinearParams& p, const Matrix& x);

struct LinearGradients {
  LinearParams params;
  Matrix x;
};

LinearGradients LinearBackward(const LinearParams& p, const Matrix& x,
                               const Matrix& grad_y);

// ---------------------------------------------------------------------------
// Optimisation

// A named parameter tensor paired with its gradient.
struct ParamBinding {
  std::string_view name;
  Matrix* param = nullptr;
  const Matrix* grad = nullptr;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

// Bias-corrected Adam. Moments are created on the first call. Throws
// kNumeric naming the tensor if any gradient entry is non-finite; in that
// case neither parameters nor state are modified.
void AdamStep(std::span<const ParamBinding> bindings, AdamState& state);

// Scales every gradient so the global L2 norm is at most max_norm. Returns
// the norm before clipping.
double ClipGlobalNorm(std::span<Matrix* const> grads, double max_norm);

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Per-tensor cap on checked coordinates; 0 checks every coordinate.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-6;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

// Central differences of a scalar closure against the analytic gradients in
// `bindings`. The closure must read the bound parameter tensors, which are
// perturbed in place and restored.
GradCheckReport GradCheck(const std::function<double()>& loss,
                          std::span<const ParamBinding> bindings,
                          const GradCheckOptions& options = {});

}  // namespace flowsiam::nn

#endif  // FLOWSIAM_NEURALNET_HPP_
