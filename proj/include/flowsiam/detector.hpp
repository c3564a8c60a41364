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

// Fleet abnormality scoring from pairwise latent distances, threshold
// calibration and per-flow classification.

#ifndef FLOWSIAM_DETECTOR_HPP_
#define FLOWSIAM_DETECTOR_HPP_

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowsiam/compressor.hpp"
#include "flowsiam/core.hpp"
#include "flowsiam/neuralnet.hpp"

namespace flowsiam::detect {

enum class SimilarityMetric { kMseTanh, kCosine };
// kCanonical: mean pairwise distance. kPaperEq4: 1 - canonical / 2.
enum class ScoreMode { kCanonical, kPaperEq4 };

std::string_view ToString(SimilarityMetric m);
std::string_view ToString(ScoreMode m);
SimilarityMetric ParseSimilarityMetric(std::string_view s);  // "mse" | "cosine"
ScoreMode ParseScoreMode(std::string_view s);                // "canonical" | "paper-eq4"

struct CosineResult {
  double value = 0.0;
  bool zero_norm = false;  // value forced to 0
};

CosineResult CosineSim(std::span<const double> a, std::span<const double> b);

// Distance term of one pair in [0, 1]: Sim for kMseTanh, (1 - cos) / 2 for
// kCosine.
double PairDistance(std::span<const double> a, std::span<const double> b,
                    SimilarityMetric metric, bool* zero_norm = nullptr);

struct PairwiseScore {
  nn::Matrix distances;  // m x m, symmetric, zero diagonal
  double score = 0.0;
  bool zero_norm = false;
};

PairwiseScore ScoreLatents(std::span<const std::vector<double>> latents, SimilarityMetric metric,
                           ScoreMode mode = ScoreMode::kCanonical);

double AbnormalityScore(std::span<const std::vector<double>> latents, SimilarityMetric metric,
                        ScoreMode mode = ScoreMode::kCanonical);

// Common theta plus optional per-street overrides. Streets without an
// override use the common value.
struct ThresholdPolicy {
  std::optional<double> common;
  std::map<std::string, double> per_street;

  double ThetaFor(const std::string& street_id) const;
  bool is_per_street() const { return !per_street.empty(); }
};

enum class PolicyKind { kCommon, kPerStreet };

struct ScoredFlow {
  std::string flow_id;
  std::string street_id;
  Label label = Label::kNormal;
  double score = 0.0;
  double millis = 0.0;
};

struct ThresholdChoice {
  double theta = 0.0;
  double f1 = 0.0;
};

// Midpoints between consecutive distinct scores, the maximum score, and
// half the minimum score, ascending.
std::vector<double> CandidateThresholds(std::span<const double> scores);

// Maximises F1 over the candidates; ties go to the larger theta. Identical
// scores yield the maximum (everything Normal).
ThresholdChoice BestThreshold(std::span<const double> scores, std::span<const Label> labels);

// kCommon needs both labels overall. kPerStreet also fits every street that
// has both labels and keeps the street's own theta unless the common theta
// does better there.
ThresholdPolicy CalibrateThreshold(std::span<const ScoredFlow> calibration, PolicyKind kind);

struct DetectorConfig {
  SimilarityMetric metric = SimilarityMetric::kMseTanh;
  ScoreMode mode = ScoreMode::kCanonical;
};

struct DetectionResult {
  std::string flow_id;
  std::string street_id;
  double score = 0.0;
  Label decision = Label::kNormal;
  nn::Matrix pairwise;
  double theta = 0.0;
  double millis = 0.0;
  bool zero_norm = false;
};

// Score without a threshold; decision and theta are left at defaults.
DetectionResult ScoreFlow(const siamese::SiameseAutoencoder& model, const FleetFlow& flow,
                          const DetectorConfig& cfg);

DetectionResult ClassifyFlow(const siamese::SiameseAutoencoder& model, const FleetFlow& flow,
                             const DetectorConfig& cfg, const ThresholdPolicy& policy);

// Every flow of the dataset, scored concurrently, in dataset order.
std::vector<ScoredFlow> ScoreDataset(const siamese::SiameseAutoencoder& model, const Dataset& d,
                                     const DetectorConfig& cfg);

// One JSON object per line: flow_id, street_id, score, decision, theta,
// millis, method. Without a policy, decision and theta are null.
void WriteJsonLines(std::span<const ScoredFlow> flows, const std::string& method,
                    const ThresholdPolicy* policy, std::ostream& out);

}  // namespace flowsiam::detect

#endif  // FLOWSIAM_DETECTOR_HPP_
