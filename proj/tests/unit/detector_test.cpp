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
#include <random>
#include <sstream>

#include "doctest.h"
#include "flowsiam/compressor.hpp"
#include "flowsiam/detector.hpp"
#include "flowsiam/simgen.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace flowsiam;
using namespace flowsiam::detect;
using flowsiam::testing::CodeOf;

namespace {

// F1 of the rule score > theta, written out from the counts.
double F1At(const std::vector<double>& s, const std::vector<Label>& l, double theta) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool predicted = s[i] > theta;
    const bool actual = l[i] == Label::kAbnormal;
    tp += predicted && actual;
    fp += predicted && !actual;
    fn += !predicted && actual;
  }
  return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

std::vector<std::vector<double>> RandomLatents(std::size_t m, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> out(m, std::vector<double>(n));
  for (auto& v : out)
    for (auto& x : v) x = u(rng);
  return out;
}

double MeanSim(const std::vector<std::vector<double>>& z) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j, ++pairs) {
      double sq = 0.0;
      for (std::size_t k = 0; k < z[i].size(); ++k) sq += (z[i][k] - z[j][k]) * (z[i][k] - z[j][k]);
      sum += std::tanh(sq / static_cast<double>(z[i].size()));
    }
  return sum / static_cast<double>(pairs);
}

}  // namespace

TEST_SUITE("detector") {
  TEST_CASE("identical members score zero") {
    const std::vector<std::vector<double>> same(4, {0.3, -0.2, 0.9});
    CHECK(AbnormalityScore(same, SimilarityMetric::kMseTanh) == 0.0);
    CHECK(AbnormalityScore(same, SimilarityMetric::kCosine) == doctest::Approx(0.0));
  }

  TEST_CASE("two members at distance 0.5") {
    // tanh(mean sq) = 0.5 for a one-component latent of difference sqrt(atanh(0.5)).
    const double gap = std::sqrt(std::atanh(0.5));
    const std::vector<std::vector<double>> z{{0.0}, {gap}};
    CHECK(AbnormalityScore(z, SimilarityMetric::kMseTanh) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(AbnormalityScore(z, SimilarityMetric::kMseTanh, ScoreMode::kPaperEq4) ==
          doctest::Approx(0.75).epsilon(1e-12));
  }

  TEST_CASE("score is the mean pairwise distance") {
    std::mt19937_64 rng(1);
    for (std::size_t m : {2u, 3u, 5u, 8u}) {
      auto z = RandomLatents(m, 4, rng);
      const auto ps = ScoreLatents(z, SimilarityMetric::kMseTanh);
      CHECK(ps.score == doctest::Approx(MeanSim(z)).epsilon(1e-12));
      for (std::size_t i = 0; i < m; ++i) {
        CHECK(ps.distances(i, i) == 0.0);
        for (std::size_t j = 0; j < m; ++j) CHECK(ps.distances(i, j) == ps.distances(j, i));
      }
      CHECK(ps.score >= 0.0);
      CHECK(ps.score < 1.0);
      std::shuffle(z.begin(), z.end(), rng);
      CHECK(AbnormalityScore(z, SimilarityMetric::kMseTanh) == ps.score);
      const double flipped = AbnormalityScore(z, SimilarityMetric::kMseTanh, ScoreMode::kPaperEq4);
      CHECK(flipped == doctest::Approx(1.0 - ps.score / 2.0).epsilon(1e-14));
    }
    CHECK(CodeOf([] { AbnormalityScore(std::vector<std::vector<double>>{{1.0}},
                                       SimilarityMetric::kMseTanh); }) ==
          ErrorCode::kInvalidArgument);
  }

  TEST_CASE("moving one member away raises the score") {
    std::vector<std::vector<double>> z{{0.1, 0.1}, {0.12, 0.08}, {0.09, 0.11}};
    double last = AbnormalityScore(z, SimilarityMetric::kMseTanh);
    for (int step = 0; step < 8; ++step) {
      z[2][0] += 0.2;
      const double now = AbnormalityScore(z, SimilarityMetric::kMseTanh);
      CHECK(now > last);
      last = now;
    }
  }

  TEST_CASE("cosine similarity") {
    const std::vector<double> a{1, 0}, b{1, 1}, c{-1, 0}, zero{0, 0};
    CHECK(CosineSim(a, a).value == doctest::Approx(1.0));
    CHECK(CosineSim(a, b).value == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(CosineSim(a, c).value == doctest::Approx(-1.0));
    const auto z = CosineSim(a, zero);
    CHECK(z.value == 0.0);
    CHECK(z.zero_norm);
    bool flag = false;
    CHECK(PairDistance(a, c, SimilarityMetric::kCosine, &flag) == doctest::Approx(1.0));
    CHECK_FALSE(flag);
    CHECK(PairDistance(a, zero, SimilarityMetric::kCosine, &flag) == doctest::Approx(0.5));
    CHECK(flag);
    const std::vector<std::vector<double>> with_zero{a, zero};
    CHECK(ScoreLatents(with_zero, SimilarityMetric::kCosine).zero_norm);
  }

  TEST_CASE("threshold calibration examples") {
    const std::vector<double> s{0.2, 0.8};
    const std::vector<Label> l{Label::kNormal, Label::kAbnormal};
    const auto best = BestThreshold(s, l);
    CHECK(best.theta == doctest::Approx(0.5));
    CHECK(best.f1 == 1.0);

    const std::vector<double> flat{0.4, 0.4, 0.4};
    const std::vector<Label> mixed{Label::kNormal, Label::kAbnormal, Label::kNormal};
    const auto none = BestThreshold(flat, mixed);
    CHECK(none.theta == 0.4);
    CHECK(F1At(flat, mixed, none.theta) == 0.0);
    CHECK(none.f1 == 0.0);

    const auto cands = CandidateThresholds(std::vector<double>{0.6, 0.2, 0.6});
    CHECK(cands == std::vector<double>{0.1, 0.4, 0.6});
  }

  TEST_CASE("best threshold attains the brute-force F1 maximum") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<double> s(25);
      std::vector<Label> l(25);
      for (std::size_t i = 0; i < s.size(); ++i) {
        l[i] = u(rng) < 0.3 ? Label::kAbnormal : Label::kNormal;
        s[i] = std::round((u(rng) + (l[i] == Label::kAbnormal ? 0.4 : 0.0)) * 20.0) / 20.0;
      }
      l[0] = Label::kAbnormal;
      l[1] = Label::kNormal;
      double brute = 0.0;
      for (int k = -1; k <= 3000; ++k) brute = std::max(brute, F1At(s, l, k / 2000.0));
      const auto best = BestThreshold(s, l);
      CHECK(best.f1 == doctest::Approx(brute).epsilon(1e-12));
      CHECK(F1At(s, l, best.theta) == doctest::Approx(best.f1).epsilon(1e-12));
    }
  }

  TEST_CASE("per-street thresholds never lose to the common threshold") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<ScoredFlow> calib;
    const std::vector<std::pair<std::string, double>> streets{
        {"path1", 0.1}, {"path2", 0.3}, {"path3", 0.5}, {"path4", 0.05}};
    for (const auto& [street, base] : streets) {
      for (int i = 0; i < 30; ++i) {
        const bool abnormal = i % 5 == 0;
        ScoredFlow f;
        f.flow_id = street + std::to_string(i);
        f.street_id = street;
        f.label = abnormal ? Label::kAbnormal : Label::kNormal;
        f.score = std::clamp(base + (abnormal ? 0.15 : 0.0) + noise(rng), 0.0, 1.0);
        calib.push_back(f);
      }
    }
    const auto common = CalibrateThreshold(calib, PolicyKind::kCommon);
    const auto per = CalibrateThreshold(calib, PolicyKind::kPerStreet);
    CHECK_FALSE(common.is_per_street());
    CHECK(per.is_per_street());
    CHECK(per.common == common.common);
    for (const auto& [street, base] : streets) {
      std::vector<double> s;
      std::vector<Label> l;
      for (const auto& f : calib)
        if (f.street_id == street) {
          s.push_back(f.score);
          l.push_back(f.label);
        }
      CHECK(F1At(s, l, per.ThetaFor(street)) >= F1At(s, l, *common.common));
    }
    CHECK(per.ThetaFor("elsewhere") == *common.common);
    ThresholdPolicy bare;
    bare.per_street["path1"] = 0.2;
    CHECK(CodeOf([&] { bare.ThetaFor("elsewhere"); }) == ErrorCode::kInvalidArgument);

    std::vector<ScoredFlow> one_class(calib.begin() + 1, calib.begin() + 5);
    CHECK(CodeOf([&] { CalibrateThreshold(one_class, PolicyKind::kCommon); }) ==
          ErrorCode::kInvalidArgument);
  }

  TEST_CASE("affine score modes give mirrored decisions and reversed AUC") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> canon, flipped;
    std::vector<Label> l;
    for (int i = 0; i < 30; ++i) {
      l.push_back(i % 3 == 0 ? Label::kAbnormal : Label::kNormal);
      canon.push_back(u(rng) * 0.5 + (l.back() == Label::kAbnormal ? 0.3 : 0.0));
      flipped.push_back(1.0 - canon.back() / 2.0);
    }
    const auto a = BestThreshold(canon, l);
    for (std::size_t i = 0; i < canon.size(); ++i)
      CHECK((canon[i] > a.theta) == (flipped[i] < 1.0 - a.theta / 2.0));
    // Ranking reverses, so the flipped score ranks normal flows above abnormal ones.
    std::size_t concordant = 0, total = 0;
    for (std::size_t i = 0; i < l.size(); ++i)
      for (std::size_t j = 0; j < l.size(); ++j)
        if (l[i] == Label::kAbnormal && l[j] == Label::kNormal) {
          ++total;
          concordant += (canon[i] > canon[j]) == (flipped[i] < flipped[j]);
        }
    CHECK(concordant == total);
  }

  TEST_CASE("scoring a generated dataset") {
    sim::GeneratorConfig g;
    g.seed = 3;
    g.flows = 6;
    g.steps = 10;
    g.fleet_size = 4;
    g.abnormal_fraction = 0.5;
    g.feature_spec = {"speed"};
    Dataset d = sim::GenerateDataset(g);
    d.normalization = FitNormalizer(d);
    auto model = siamese::MakeModel({1, 5, 2, 10}, 4);
    model.feature_spec = d.feature_spec;
    model.normalization = *d.normalization;

    const auto scored = ScoreDataset(model, d, {});
    REQUIRE(scored.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(scored[i].flow_id == d.flows[i].flow_id);
      CHECK(scored[i].label == d.flows[i].label);
      const auto r = ScoreFlow(model, d.flows[i], {});
      CHECK(r.score == scored[i].score);
      CHECK(r.pairwise.rows() == 4);
    }
    ThresholdPolicy policy;
    policy.common = scored[2].score;
    const auto c = ClassifyFlow(model, d.flows[2], {}, policy);
    CHECK(c.decision == Label::kNormal);
    CHECK(c.theta == scored[2].score);

    const auto flipped = ScoreDataset(model, d, {SimilarityMetric::kMseTanh, ScoreMode::kPaperEq4});
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(flipped[i].score == doctest::Approx(1.0 - scored[i].score / 2.0).epsilon(1e-14));

    Dataset other = d;
    other.feature_spec = {"x"};
    CHECK(CodeOf([&] { ScoreDataset(model, other, {}); }) == ErrorCode::kInvalidArgument);

    std::ostringstream lines;
    WriteJsonLines(scored, "siamese-mse", &policy, lines);
    std::istringstream in(lines.str());
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j["method"] == "siamese-mse");
      CHECK(j["decision"].is_string());
      ++count;
    }
    CHECK(count == 6);
    std::ostringstream raw;
    WriteJsonLines(scored, "siamese-mse", nullptr, raw);
    CHECK(nlohmann::json::parse(raw.str().substr(0, raw.str().find('\n')))["theta"].is_null());
  }

  TEST_CASE("option parsing") {
    CHECK(ParseSimilarityMetric("mse") == SimilarityMetric::kMseTanh);
    CHECK(ParseSimilarityMetric("cosine") == SimilarityMetric::kCosine);
    CHECK(ParseScoreMode("paper-eq4") == ScoreMode::kPaperEq4);
    CHECK(ToString(ScoreMode::kCanonical) == "canonical");
    CHECK(CodeOf([] { ParseSimilarityMetric("l2"); }).has_value());
  }
}
