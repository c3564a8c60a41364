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

#include "flowsiam/error.hpp"
#include "flowsiam/neuralnet.hpp"

namespace flowsiam::nn {
namespace {

// y += a * x over n contiguous entries.
inline void Axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

Matrix Transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  return t;
}

void CheckLstmShapes(const LstmParams& p) {
  const std::size_t g = 4 * p.hidden_size;
  Require(p.w.rows() == g && p.w.cols() == p.input_size &&
              p.u.rows() == g && p.u.cols() == p.hidden_size &&
              p.b.rows() == g && p.b.cols() == 1,
          ErrorCode::kShape, "inconsistent LSTM parameter shapes");
}

}  // namespace

LstmParams::LstmParams(std::size_t in, std::size_t hidden)
    : input_size(in),
      hidden_size(hidden),
      w(4 * hidden, in),
      u(4 * hidden, hidden),
      b(4 * hidden, 1) {}

LstmCache LstmForward(const LstmParams& p, const Matrix& x,
                      std::span<const double> h0, std::span<const double> c0) {
  CheckLstmShapes(p);
  const std::size_t hs = p.hidden_size;
  const std::size_t g = 4 * hs;
  const std::size_t steps = x.rows();
  Require(x.cols() == p.input_size, ErrorCode::kShape,
          "LSTM input has " + std::to_string(x.cols()) + " features, layer expects " +
              std::to_string(p.input_size));
  Require(h0.empty() || h0.size() == hs, ErrorCode::kShape, "LSTM h0 size mismatch");
  Require(c0.empty() || c0.size() == hs, ErrorCode::kShape, "LSTM c0 size mismatch");

  LstmCache cache;
  cache.x = x;
  cache.gates = Matrix(steps, g);
  cache.c = Matrix(steps, hs);
  cache.tanh_c = Matrix(steps, hs);
  cache.h = Matrix(steps, hs);
  cache.h0.assign(hs, 0.0);
  cache.c0.assign(hs, 0.0);
  if (!h0.empty()) std::copy(h0.begin(), h0.end(), cache.h0.begin());
  if (!c0.empty()) std::copy(c0.begin(), c0.end(), cache.c0.begin());

  const Matrix wt = Transpose(p.w);  // d_in x 4H
  const Matrix ut = Transpose(p.u);  // H x 4H

  for (std::size_t t = 0; t < steps; ++t) {
    double* z = cache.gates.row(t).data();
    std::copy(p.b.data(), p.b.data() + g, z);
    const double* xt = x.row(t).data();
    for (std::size_t k = 0; k < p.input_size; ++k) Axpy(xt[k], wt.row(k).data(), z, g);
    const double* h_prev = t == 0 ? cache.h0.data() : cache.h.row(t - 1).data();
    const double* c_prev = t == 0 ? cache.c0.data() : cache.c.row(t - 1).data();
    for (std::size_t k = 0; k < hs; ++k) Axpy(h_prev[k], ut.row(k).data(), z, g);

    double* ct = cache.c.row(t).data();
    double* tct = cache.tanh_c.row(t).data();
    double* ht = cache.h.row(t).data();
    for (std::size_t j = 0; j < hs; ++j) {
      const double i_gate = Sigmoid(z[j]);
      const double f_gate = Sigmoid(z[hs + j]);
      const double g_gate = std::tanh(z[2 * hs + j]);
      const double o_gate = Sigmoid(z[3 * hs + j]);
      z[j] = i_gate;
      z[hs + j] = f_gate;
      z[2 * hs + j] = g_gate;
      z[3 * hs + j] = o_gate;
      ct[j] = f_gate * c_prev[j] + i_gate * g_gate;
      tct[j] = std::tanh(ct[j]);
      ht[j] = o_gate * tct[j];
    }
  }
  return cache;
}

LstmGradients LstmBackward(const LstmParams& p, const LstmCache& cache,
                           const Matrix& grad_h) {
  CheckLstmShapes(p);
  const std::size_t hs = p.hidden_size;
  const std::size_t g = 4 * hs;
  const std::size_t steps = cache.h.rows();
  Require(cache.h.cols() == hs && cache.x.cols() == p.input_size,
          ErrorCode::kShape, "LSTM cache does not match parameters");
  Require(grad_h.rows() == steps && grad_h.cols() == hs, ErrorCode::kShape,
          "LSTM grad_h is " + ShapeString(grad_h) + ", expected " +
              ShapeString(cache.h));

  LstmGradients out;
  out.params = LstmParams(p.input_size, hs);
  out.x = Matrix(steps, p.input_size);
  std::vector<double> dh_next(hs, 0.0);
  std::vector<double> dc_next(hs, 0.0);
  std::vector<double> dz(g);

  for (std::size_t s = steps; s-- > 0;) {
    const double* gate = cache.gates.row(s).data();
    const double* tct = cache.tanh_c.row(s).data();
    const double* c_prev = s == 0 ? cache.c0.data() : cache.c.row(s - 1).data();
    const double* h_prev = s == 0 ? cache.h0.data() : cache.h.row(s - 1).data();
    const double* gh = grad_h.row(s).data();
    for (std::size_t j = 0; j < hs; ++j) {
      const double i_gate = gate[j];
      const double f_gate = gate[hs + j];
      const double g_gate = gate[2 * hs + j];
      const double o_gate = gate[3 * hs + j];
      const double dh = gh[j] + dh_next[j];
      const double dc = dh * o_gate * (1.0 - tct[j] * tct[j]) + dc_next[j];
      dz[j] = dc * g_gate * i_gate * (1.0 - i_gate);
      dz[hs + j] = dc * c_prev[j] * f_gate * (1.0 - f_gate);
      dz[2 * hs + j] = dc * i_gate * (1.0 - g_gate * g_gate);
      dz[3 * hs + j] = dh * tct[j] * o_gate * (1.0 - o_gate);
      dc_next[j] = dc * f_gate;
    }
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    const double* xs = cache.x.row(s).data();
    double* dx = out.x.row(s).data();
    for (std::size_t r = 0; r < g; ++r) {
      const double d = dz[r];
      if (d == 0.0) continue;
      Axpy(d, xs, out.params.w.row(r).data(), p.input_size);
      Axpy(d, h_prev, out.params.u.row(r).data(), hs);
      out.params.b(r, 0) += d;
      Axpy(d, p.w.row(r).data(), dx, p.input_size);
      Axpy(d, p.u.row(r).data(), dh_next.data(), hs);
    }
  }
  out.h0 = std::move(dh_next);
  out.c0 = std::move(dc_next);
  return out;
}

LinearParams::LinearParams(std::size_t in, std::size_t out)
    : w(out, in), b(out, 1) {}

Matrix LinearForward(const LinearParams& p, const Matrix& x) {
  Require(p.b.rows() == p.w.rows() && p.b.cols() == 1, ErrorCode::kShape,
          "inconsistent linear parameter shapes");
  Require(x.cols() == p.input_size(), ErrorCode::kShape,
          "linear input has " + std::to_string(x.cols()) + " features, layer expects " +
              std::to_string(p.input_size()));
  const std::size_t out_dim = p.output_size();
  const Matrix wt = Transpose(p.w);
  Matrix y(x.rows(), out_dim);
  for (std::size_t t = 0; t < x.rows(); ++t) {
    double* yt = y.row(t).data();
    std::copy(p.b.data(), p.b.data() + out_dim, yt);
    const double* xt = x.row(t).data();
    for (std::size_t k = 0; k < x.cols(); ++k) Axpy(xt[k], wt.row(k).data(), yt, out_dim);
  }
  return y;
}

LinearGradients LinearBackward(const LinearParams& p, const Matrix& x,
                               const Matrix& grad_y) {
  Require(x.cols() == p.input_size(), ErrorCode::kShape, "linear backward: input shape");
  Require(grad_y.rows() == x.rows() && grad_y.cols() == p.output_size(),
          ErrorCode::kShape, "linear backward: grad_y is " + ShapeString(grad_y));
  LinearGradients out;
  out.params = LinearParams(p.input_size(), p.output_size());
  out.x = Matrix(x.rows(), x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const double* xt = x.row(t).data();
    const double* gy = grad_y.row(t).data();
    double* dx = out.x.row(t).data();
    for (std::size_t r = 0; r < p.output_size(); ++r) {
      Axpy(gy[r], xt, out.params.w.row(r).data(), x.cols());
      out.params.b(r, 0) += gy[r];
      Axpy(gy[r], p.w.row(r).data(), dx, x.cols());
    }
  }
  return out;
}

}  // namespace flowsiam::nn
