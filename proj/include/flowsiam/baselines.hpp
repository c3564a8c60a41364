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

// Comparison methods: dynamic time warping, global alignment kernel and
// isolation forest, plus adapters that turn each into a fleet score.

#ifndef FLOWSIAM_BASELINES_HPP_
#define FLOWSIAM_BASELINES_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "flowsiam/core.hpp"
#include "flowsiam/detector.hpp"
#include "flowsiam/neuralnet.hpp"

namespace flowsiam::baselines {

using Series = nn::Matrix;  // T x d, one row per step

struct DtwConfig {
  std::optional<std::size_t> band;  // Sakoe-Chiba radius
};

// Minimal accumulated squared-Euclidean cost over monotone alignments.
double DtwDistance(const Series& a, const Series& b, const DtwConfig& cfg = {});

struct GakConfig {
  double sigma = 1.0;
};

// log of the global alignment kernel with local kernel e / (2 - e),
// e = exp(-|x - y|^2 / (2 sigma^2)).
double GakLogKernel(const Series& a, const Series& b, const GakConfig& cfg);

// Median Euclidean distance between points drawn from the series; at most
// max_points points are used, taken at an even stride. Falls back to 1 when
// the median is zero.
double MedianHeuristicSigma(std::span<const Series> series, std::size_t max_points = 1000);

// c(n) = 2 H(n-1) - 2 (n-1) / n with c(n) = 0 for n <= 1.
double AveragePathLength(std::size_t n);

struct IForestConfig {
  std::size_t n_trees = 100;
  std::size_t subsample = 256;  // capped at N
  std::uint64_t seed = 1;
};

class IsolationForest {
 public:
  // points: N x k.
  static IsolationForest Fit(const nn::Matrix& points, const IForestConfig& cfg);

  // 2^(-E[h(x)] / c(psi)).
  double Score(std::span<const double> x) const;
  double MeanPathLength(std::span<const double> x) const;
  std::size_t subsample() const { return psi_; }
  std::size_t depth_limit() const { return depth_limit_; }

 private:
  struct Node {
    std::size_t feature = 0;
    double split = 0.0;
    std::size_t left = 0;  // 0 marks a leaf
    std::size_t right = 0;
    std::size_t size = 0;
  };
  using Tree = std::vector<Node>;

  static std::size_t Build(Tree& tree, const nn::Matrix& points, std::vector<std::size_t>& idx,
                           std::size_t begin, std::size_t end, std::size_t depth,
                           std::size_t limit, std::mt19937_64& rng);
  double PathLength(const Tree& tree, std::span<const double> x) const;

  std::vector<Tree> trees_;
  std::size_t psi_ = 0;
  std::size_t depth_limit_ = 0;
  std::size_t features_ = 0;
};

// tanh(mean pairwise DTW / (T d)).
double FleetScoreDtw(std::span<const Series> members, const DtwConfig& cfg = {});
// Mean pairwise 1 - normalised kernel, clamped to [0, 1].
double FleetScoreGak(std::span<const Series> members, const GakConfig& cfg);

// mean speed, std speed, max |accel|, net displacement.
std::vector<double> VehicleSummary(const Trajectory& t);

// Fits one forest on every vehicle of the dataset; a flow scores the maximum
// of its members.
std::vector<double> FleetScoresIForest(const Dataset& d, const IForestConfig& cfg);

// Member windows of every flow, resampled to d.steps and normalised.
std::vector<std::vector<Series>> DatasetWindows(const Dataset& d, const FeatureSpec& spec,
                                                const Normalization& norm);

std::vector<detect::ScoredFlow> ScoreDatasetDtw(const Dataset& d, const Normalization& norm,
                                                const DtwConfig& cfg = {});
std::vector<detect::ScoredFlow> ScoreDatasetGak(const Dataset& d, const Normalization& norm,
                                                const GakConfig& cfg);
std::vector<detect::ScoredFlow> ScoreDatasetIForest(const Dataset& d, const IForestConfig& cfg);

}  // namespace flowsiam::baselines

#endif  // FLOWSIAM_BASELINES_HPP_
