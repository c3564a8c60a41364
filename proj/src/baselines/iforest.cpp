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

#include "flowsiam/baselines.hpp"
#include "flowsiam/error.hpp"
#include "flowsiam/parallel.hpp"

namespace flowsiam::baselines {
namespace {

constexpr double kEulerGamma = 0.57721566490153286061;
constexpr std::size_t kExactHarmonicLimit = 100000;

double Harmonic(std::size_t i) {
  if (i <= kExactHarmonicLimit) {
    double h = 0.0;
    for (std::size_t k = i; k >= 1; --k) h += 1.0 / static_cast<double>(k);
    return h;
  }
  const double x = static_cast<double>(i);
  return std::log(x) + kEulerGamma + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x);
}

std::mt19937_64 TreeStream(std::uint64_t seed, std::uint64_t tree) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tree), static_cast<std::uint32_t>(tree >> 32),
                    0x1f0e5u};
  return std::mt19937_64(seq);
}

}  // namespace

double AveragePathLength(std::size_t n) {
  if (n <= 1) return 0.0;
  const double nn = static_cast<double>(n);
  return 2.0 * Harmonic(n - 1) - 2.0 * (nn - 1.0) / nn;
}

IsolationForest IsolationForest::Fit(const nn::Matrix& points, const IForestConfig& cfg) {
  Require(points.rows() >= 2, ErrorCode::kInvalidArgument, "iForest needs at least two points");
  Require(points.cols() >= 1, ErrorCode::kInvalidArgument, "iForest points have no features");
  Require(cfg.n_trees >= 1, ErrorCode::kInvalidArgument, "n_trees must be >= 1");
  Require(cfg.subsample >= 2, ErrorCode::kInvalidArgument, "subsample must be >= 2");
  Require(points.AllFinite(), ErrorCode::kNumeric, "iForest points are not finite");
  IsolationForest forest;
  forest.psi_ = std::min(cfg.subsample, points.rows());
  forest.depth_limit_ =
      static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(forest.psi_))));
  forest.features_ = points.cols();
  forest.trees_.resize(cfg.n_trees);
  ParallelFor(cfg.n_trees, [&](std::size_t t) {
    auto rng = TreeStream(cfg.seed, t);
    std::vector<std::size_t> idx(points.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t k = 0; k < forest.psi_; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
    }
    idx.resize(forest.psi_);
    Tree& tree = forest.trees_[t];
    tree.reserve(2 * forest.psi_);
    Build(tree, points, idx, 0, idx.size(), 0, forest.depth_limit_, rng);
  });
  return forest;
}

std::size_t IsolationForest::Build(Tree& tree, const nn::Matrix& points,
                                   std::vector<std::size_t>& idx, std::size_t begin,
                                   std::size_t end, std::size_t depth, std::size_t limit,
                                   std::mt19937_64& rng) {
  const std::size_t id = tree.size();
  tree.push_back(Node{});
  tree[id].size = end - begin;
  if (end - begin <= 1 || depth >= limit) return id;

  std::vector<std::size_t> splittable;
  std::vector<std::pair<double, double>> ranges(points.cols());
  for (std::size_t f = 0; f < points.cols(); ++f) {
    double lo = points(idx[begin], f);
    double hi = lo;
    for (std::size_t k = begin + 1; k < end; ++k) {
      lo = std::min(lo, points(idx[k], f));
      hi = std::max(hi, points(idx[k], f));
    }
    ranges[f] = {lo, hi};
    if (hi > lo) splittable.push_back(f);
  }
  if (splittable.empty()) return id;

  std::uniform_int_distribution<std::size_t> pick(0, splittable.size() - 1);
  const std::size_t feature = splittable[pick(rng)];
  const auto [lo, hi] = ranges[feature];
  double split = std::uniform_real_distribution<double>(lo, hi)(rng);
  if (split <= lo) split = lo + (hi - lo) / 2.0;
  const auto mid = std::partition(
      idx.begin() + static_cast<std::ptrdiff_t>(begin), idx.begin() + static_cast<std::ptrdiff_t>(end),
      [&](std::size_t i) { return points(i, feature) < split; });
  const auto m = static_cast<std::size_t>(mid - idx.begin());

  const std::size_t left = Build(tree, points, idx, begin, m, depth + 1, limit, rng);
  const std::size_t right = Build(tree, points, idx, m, end, depth + 1, limit, rng);
  tree[id].feature = feature;
  tree[id].split = split;
  tree[id].left = left;
  tree[id].right = right;
  return id;
}

double IsolationForest::PathLength(const Tree& tree, std::span<const double> x) const {
  std::size_t node = 0;
  std::size_t depth = 0;
  while (tree[node].left != 0) {
    node = x[tree[node].feature] < tree[node].split ? tree[node].left : tree[node].right;
    ++depth;
  }
  return static_cast<double>(depth) + AveragePathLength(tree[node].size);
}

double IsolationForest::MeanPathLength(std::span<const double> x) const {
  Require(!trees_.empty(), ErrorCode::kState, "iForest has not been fitted");
  Require(x.size() == features_, ErrorCode::kShape,
          "iForest point has " + std::to_string(x.size()) + " features, expected " +
              std::to_string(features_));
  double sum = 0.0;
  for (const Tree& t : trees_) sum += PathLength(t, x);
  return sum / static_cast<double>(trees_.size());
}

double IsolationForest::Score(std::span<const double> x) const {
  return std::exp2(-MeanPathLength(x) / AveragePathLength(psi_));
}

}  // namespace flowsiam::baselines
