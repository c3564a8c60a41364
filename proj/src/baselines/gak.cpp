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
#include <limits>

#include "flowsiam/baselines.hpp"
#include "flowsiam/error.hpp"

namespace flowsiam::baselines {
namespace {

double LogSumExp3(double a, double b, double c) {
  const double hi = std::max({a, b, c});
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi) + std::exp(c - hi));
}

}  // namespace

double GakLogKernel(const Series& a, const Series& b, const GakConfig& cfg) {
  Require(a.rows() > 0 && b.rows() > 0, ErrorCode::kInvalidArgument, "GAK of an empty series");
  Require(a.cols() == b.cols(), ErrorCode::kShape, "GAK series differ in feature count");
  Require(cfg.sigma > 0.0 && std::isfinite(cfg.sigma), ErrorCode::kInvalidArgument,
          "GAK sigma must be positive");
  const std::size_t n = a.rows();
  const std::size_t m = b.rows();
  const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<double> prev(m + 1, kNegInf);
  std::vector<double> cur(m + 1, kNegInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = kNegInf;
    const auto ai = a.row(i - 1);
    for (std::size_t j = 1; j <= m; ++j) {
      const auto bj = b.row(j - 1);
      double dist = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) {
        const double e = ai[k] - bj[k];
        dist += e * e;
      }
      const double log_e = -dist * inv;
      const double log_kappa = log_e - std::log(2.0 - std::exp(log_e));
      cur[j] = log_kappa + LogSumExp3(prev[j - 1], prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double MedianHeuristicSigma(std::span<const Series> series, std::size_t max_points) {
  std::size_t total = 0;
  for (const auto& s : series) total += s.rows();
  Require(total >= 2, ErrorCode::kInvalidArgument, "median heuristic needs at least two points");
  Require(max_points >= 2, ErrorCode::kInvalidArgument, "max_points must be >= 2");
  const std::size_t stride = (total + max_points - 1) / max_points;
  std::vector<std::span<const double>> points;
  std::size_t k = 0;
  for (const auto& s : series)
    for (std::size_t r = 0; r < s.rows(); ++r, ++k)
      if (k % stride == 0) points.push_back(s.row(r));
  std::vector<double> dists;
  dists.reserve(points.size() * (points.size() - 1) / 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < points[i].size(); ++c) {
        const double e = points[i][c] - points[j][c];
        acc += e * e;
      }
      dists.push_back(std::sqrt(acc));
    }
  }
  if (dists.empty()) return 1.0;
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid > 0.0 ? *mid : 1.0;
}

}  // namespace flowsiam::baselines
