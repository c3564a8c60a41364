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
#include <cstddef>
#include <limits>

#include "flowsiam/baselines.hpp"
#include "flowsiam/error.hpp"

namespace flowsiam::baselines {

double DtwDistance(const Series& a, const Series& b, const DtwConfig& cfg) {
  Require(a.rows() > 0 && b.rows() > 0, ErrorCode::kInvalidArgument, "DTW of an empty series");
  Require(a.cols() == b.cols(), ErrorCode::kShape,
          "DTW series differ in feature count: " + nn::ShapeString(a) + " vs " +
              nn::ShapeString(b));
  const std::size_t n = a.rows();
  const std::size_t m = b.rows();
  const std::size_t gap = n > m ? n - m : m - n;
  const std::size_t radius = cfg.band ? std::max(*cfg.band, gap) : std::max(n, m);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> prev(m + 1, kInf);
  std::vector<double> cur(m + 1, kInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    std::fill(cur.begin(), cur.end(), kInf);
    const std::size_t lo = i > radius ? i - radius : 1;
    const std::size_t hi = std::min(m, i + radius);
    const auto ai = a.row(i - 1);
    for (std::size_t j = lo; j <= hi; ++j) {
      const auto bj = b.row(j - 1);
      double cost = 0.0;
      for (std::size_t k = 0; k < ai.size(); ++k) {
        const double e = ai[k] - bj[k];
        cost += e * e;
      }
      cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace flowsiam::baselines
