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

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "flowsiam/neuralnet.hpp"
#include "helpers.hpp"

namespace nn = flowsiam::nn;
using flowsiam::ErrorCode;
using flowsiam::testing::CodeOf;

namespace {

nn::Matrix Random(std::size_t r, std::size_t c, std::mt19937_64& rng, double bound = 0.8) {
  nn::Matrix m(r, c);
  nn::InitUniform(m, bound, rng);
  return m;
}

double Dot(const nn::Matrix& a, const nn::Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_SUITE("neuralnet") {
  TEST_CASE("matrix construction and arithmetic") {
    auto m = nn::Matrix::FromRows({{1, 2, 3}, {4, 5, 6}});
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 2) == 6.0);
    CHECK(nn::ShapeString(m) == "2x3");
    auto n = m;
    n += m;
    CHECK(n(0, 1) == 4.0);
    n *= 0.5;
    CHECK(n == m);
    const std::vector<double> v = {1.5, -2.0};
    auto col = nn::Matrix::Column(v);
    CHECK(col.rows() == 2);
    CHECK(col.cols() == 1);
    CHECK(col(1, 0) == -2.0);
    CHECK(m.AllFinite());
    m(0, 0) = std::nan("");
    CHECK_FALSE(m.AllFinite());
    nn::Matrix other(3, 2);
    CHECK(CodeOf([&] { n += other; }) == ErrorCode::kShape);
  }

  TEST_CASE("activation derivatives at zero") {
    CHECK(nn::TanhDerivative(0.0) == 1.0);
    CHECK(nn::SigmoidDerivative(0.0) == 0.25);
    CHECK(nn::Sigmoid(0.0) == 0.5);
  }

  TEST_CASE("zero-parameter LSTM stays at the origin") {
    nn::LstmParams p(3, 4);
    std::mt19937_64 rng(1);
    const auto x = Random(6, 3, rng, 5.0);
    const auto cache = nn::LstmForward(p, x);
    for (std::size_t i = 0; i < cache.h.size(); ++i) CHECK(cache.h.data()[i] == 0.0);
  }

  TEST_CASE("one-dimensional LSTM matches a hand-evaluated recurrence") {
    nn::LstmParams p(1, 1);
    const double wi = 0.5, wf = -0.3, wg = 0.8, wo = 0.2;
    const double ui = 0.1, uf = 0.4, ug = -0.6, uo = 0.7;
    const double bi = 0.05, bf = 1.0, bg = -0.1, bo = 0.3;
    p.w = nn::Matrix::FromRows({{wi}, {wf}, {wg}, {wo}});
    p.u = nn::Matrix::FromRows({{ui}, {uf}, {ug}, {uo}});
    p.b = nn::Matrix::FromRows({{bi}, {bf}, {bg}, {bo}});
    const auto x = nn::Matrix::FromRows({{1.2}, {-0.7}});
    const auto cache = nn::LstmForward(p, x);

    double h = 0.0, c = 0.0;
    for (double xt : {1.2, -0.7}) {
      const double i = Sig(wi * xt + ui * h + bi);
      const double f = Sig(wf * xt + uf * h + bf);
      const double g = std::tanh(wg * xt + ug * h + bg);
      const double o = Sig(wo * xt + uo * h + bo);
      c = f * c + i * g;
      h = o * std::tanh(c);
    }
    CHECK(cache.h(1, 0) == doctest::Approx(h).epsilon(1e-14));
    CHECK(cache.c(1, 0) == doctest::Approx(c).epsilon(1e-14));
  }

  TEST_CASE("LSTM hidden states are bounded") {
    std::mt19937_64 rng(7);
    nn::LstmParams p(2, 3);
    p.w = Random(12, 2, rng, 4.0);
    p.u = Random(12, 3, rng, 4.0);
    p.b = Random(12, 1, rng, 4.0);
    const auto cache = nn::LstmForward(p, Random(20, 2, rng, 10.0));
    for (std::size_t i = 0; i < cache.h.size(); ++i) {
      CHECK(cache.h.data()[i] > -1.0);
      CHECK(cache.h.data()[i] < 1.0);
    }
  }

  TEST_CASE("LSTM shape mismatch is rejected") {
    nn::LstmParams p(2, 3);
    CHECK(CodeOf([&] { nn::LstmForward(p, nn::Matrix(4, 3)); }) == ErrorCode::kShape);
  }

  TEST_CASE("zero upstream gradient gives zero gradients") {
    std::mt19937_64 rng(3);
    nn::LstmParams p(2, 3);
    p.w = Random(12, 2, rng);
    p.u = Random(12, 3, rng);
    p.b = Random(12, 1, rng);
    const auto cache = nn::LstmForward(p, Random(4, 2, rng));
    const auto g = nn::LstmBackward(p, cache, nn::Matrix(4, 3));
    for (const nn::Matrix* m : {&g.params.w, &g.params.u, &g.params.b, &g.x})
      for (std::size_t i = 0; i < m->size(); ++i) CHECK(m->data()[i] == 0.0);
  }

  TEST_CASE("single-step LSTM gradients match closed-form expressions") {
    nn::LstmParams p(1, 1);
    p.w = nn::Matrix::FromRows({{0.4}, {-0.2}, {0.9}, {0.3}});
    p.u = nn::Matrix::FromRows({{0.0}, {0.0}, {0.0}, {0.0}});
    p.b = nn::Matrix::FromRows({{0.1}, {0.5}, {-0.2}, {0.25}});
    const double x = 0.8;
    const auto cache = nn::LstmForward(p, nn::Matrix::FromRows({{x}}));
    const auto g = nn::LstmBackward(p, cache, nn::Matrix::FromRows({{1.0}}));

    const double i = Sig(0.4 * x + 0.1);
    const double gg = std::tanh(0.9 * x - 0.2);
    const double o = Sig(0.3 * x + 0.25);
    const double c = i * gg;
    const double tc = std::tanh(c);
    const double dc = o * (1 - tc * tc);
    CHECK(g.params.b(3, 0) == doctest::Approx(tc * o * (1 - o)).epsilon(1e-13));
    CHECK(g.params.b(0, 0) == doctest::Approx(dc * gg * i * (1 - i)).epsilon(1e-13));
    CHECK(g.params.b(2, 0) == doctest::Approx(dc * i * (1 - gg * gg)).epsilon(1e-13));
    CHECK(g.params.b(1, 0) == 0.0);
    CHECK(g.params.w(0, 0) == doctest::Approx(x * dc * gg * i * (1 - i)).epsilon(1e-13));
    const double dx = 0.4 * dc * gg * i * (1 - i) + 0.9 * dc * i * (1 - gg * gg) +
                      0.3 * tc * o * (1 - o);
    CHECK(g.x(0, 0) == doctest::Approx(dx).epsilon(1e-13));
  }

  TEST_CASE("LSTM backward matches central differences") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      std::mt19937_64 rng(seed);
      const std::size_t d = 1 + seed % 3, h = 2 + seed % 3, t = 3 + seed % 3;
      nn::LstmParams p(d, h);
      p.w = Random(4 * h, d, rng);
      p.u = Random(4 * h, h, rng);
      p.b = Random(4 * h, 1, rng);
      auto x = Random(t, d, rng);
      const auto weights = Random(t, h, rng, 1.0);
      const auto loss = [&] { return Dot(nn::LstmForward(p, x).h, weights); };
      const auto grads = nn::LstmBackward(p, nn::LstmForward(p, x), weights);
      const nn::ParamBinding b[] = {{"w", &p.w, &grads.params.w},
                                    {"u", &p.u, &grads.params.u},
                                    {"b", &p.b, &grads.params.b},
                                    {"x", &x, &grads.x}};
      const auto report = nn::GradCheck(loss, b);
      CHECK(report.passed);
      CHECK(report.max_rel_error < 1e-4);
    }
  }

  TEST_CASE("LSTM initial-state gradients match central differences") {
    std::mt19937_64 rng(5);
    nn::LstmParams p(2, 3);
    p.w = Random(12, 2, rng);
    p.u = Random(12, 3, rng);
    p.b = Random(12, 1, rng);
    const auto x = Random(4, 2, rng);
    auto h0 = Random(3, 1, rng);
    auto c0 = Random(3, 1, rng);
    const auto weights = Random(4, 3, rng, 1.0);
    const auto loss = [&] {
      return Dot(nn::LstmForward(p, x, {h0.data(), 3}, {c0.data(), 3}).h, weights);
    };
    const auto g = nn::LstmBackward(p, nn::LstmForward(p, x, {h0.data(), 3}, {c0.data(), 3}),
                                    weights);
    const auto gh0 = nn::Matrix::Column(g.h0);
    const auto gc0 = nn::Matrix::Column(g.c0);
    const nn::ParamBinding b[] = {{"h0", &h0, &gh0}, {"c0", &c0, &gc0}};
    CHECK(nn::GradCheck(loss, b).max_rel_error < 1e-4);
  }

  TEST_CASE("linear layer forward and backward") {
    nn::LinearParams id(2, 2);
    id.w = nn::Matrix::FromRows({{1, 0}, {0, 1}});
    const auto x = nn::Matrix::FromRows({{0.3, -1.2}, {2.0, 0.5}});
    CHECK(nn::LinearForward(id, x) == x);

    std::mt19937_64 rng(9);
    nn::LinearParams p(3, 2);
    p.w = Random(2, 3, rng);
    p.b = Random(2, 1, rng);
    auto in = Random(5, 3, rng);
    const auto weights = Random(5, 2, rng);
    const auto g = nn::LinearBackward(p, in, weights);
    const auto loss = [&] { return Dot(nn::LinearForward(p, in), weights); };
    const nn::ParamBinding b[] = {
        {"w", &p.w, &g.params.w}, {"b", &p.b, &g.params.b}, {"x", &in, &g.x}};
    nn::GradCheckOptions opt;
    opt.tolerance = 1e-6;
    const auto report = nn::GradCheck(loss, b, opt);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-6);
  }

  TEST_CASE("Adam: zero gradient leaves parameters unchanged") {
    auto p = nn::Matrix::FromRows({{1.0, -2.0}});
    const nn::Matrix g(1, 2);
    nn::AdamState state;
    const nn::ParamBinding b[] = {{"p", &p, &g}};
    nn::AdamStep(b, state);
    CHECK(p == nn::Matrix::FromRows({{1.0, -2.0}}));
    CHECK(state.step == 1);
  }

  TEST_CASE("Adam: first step moves by lr against the gradient sign") {
    auto p = nn::Matrix::FromRows({{0.0, 0.0, 0.0}});
    const auto g = nn::Matrix::FromRows({{3.0, -0.5, 1e-2}});
    nn::AdamState state;
    const nn::ParamBinding b[] = {{"p", &p, &g}};
    nn::AdamStep(b, state);
    CHECK(p(0, 0) == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(p(0, 1) == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(p(0, 2) == doctest::Approx(-1e-3).epsilon(1e-5));
  }

  TEST_CASE("Adam: identical state copies give identical results") {
    auto p1 = nn::Matrix::FromRows({{0.2, 0.4}});
    auto p2 = p1;
    const auto g = nn::Matrix::FromRows({{0.1, -0.3}});
    nn::AdamState s1;
    const nn::ParamBinding b1[] = {{"p", &p1, &g}};
    nn::AdamStep(b1, s1);
    nn::AdamState s2 = s1;
    auto q1 = p1;
    auto q2 = p1;
    const nn::ParamBinding c1[] = {{"p", &q1, &g}};
    const nn::ParamBinding c2[] = {{"p", &q2, &g}};
    nn::AdamStep(c1, s1);
    nn::AdamStep(c2, s2);
    CHECK(q1 == q2);
    (void)p2;
  }

  TEST_CASE("Adam: non-finite gradient is reported by tensor name") {
    auto a = nn::Matrix::FromRows({{1.0}});
    auto b = nn::Matrix::FromRows({{2.0}});
    const auto ga = nn::Matrix::FromRows({{0.5}});
    const auto gb = nn::Matrix::FromRows({{std::numeric_limits<double>::infinity()}});
    nn::AdamState state;
    const nn::ParamBinding bind[] = {{"enc1.w", &a, &ga}, {"dec2.u", &b, &gb}};
    CHECK(CodeOf([&] { nn::AdamStep(bind, state); }) == ErrorCode::kNumeric);
    CHECK(flowsiam::testing::MessageOf([&] { nn::AdamStep(bind, state); }).find("dec2.u") !=
          std::string::npos);
    CHECK(a(0, 0) == 1.0);
    CHECK(state.step == 0);
  }

  TEST_CASE("global norm clipping") {
    auto g1 = nn::Matrix::FromRows({{3.0}});
    auto g2 = nn::Matrix::FromRows({{4.0}});
    nn::Matrix* gs[] = {&g1, &g2};
    CHECK(nn::ClipGlobalNorm(gs, 1.0) == doctest::Approx(5.0));
    CHECK(g1(0, 0) == doctest::Approx(0.6));
    CHECK(g2(0, 0) == doctest::Approx(0.8));
    CHECK(nn::ClipGlobalNorm(gs, 10.0) == doctest::Approx(1.0));
    CHECK(g1(0, 0) == doctest::Approx(0.6));
  }

  TEST_CASE("gradient check on a quadratic agrees to roundoff") {
    auto p = nn::Matrix::FromRows({{0.3, -1.7}, {2.5, 0.01}});
    const auto loss = [&] {
      double s = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) s += 0.5 * p.data()[i] * p.data()[i];
      return s;
    };
    const nn::Matrix grad = p;
    const nn::ParamBinding b[] = {{"p", &p, &grad}};
    const auto report = nn::GradCheck(loss, b);
    CHECK(report.max_rel_error < 1e-7);
    CHECK(report.coords_checked == 4);
    CHECK(p == grad);
  }

  TEST_CASE("gradient check flags a wrong gradient") {
    auto p = nn::Matrix::FromRows({{1.0, 2.0}});
    const auto loss = [&] { return p(0, 0) * p(0, 0) + p(0, 1); };
    const auto wrong = nn::Matrix::FromRows({{2.0, 3.0}});
    const nn::ParamBinding b[] = {{"p", &p, &wrong}};
    const auto report = nn::GradCheck(loss, b);
    CHECK_FALSE(report.passed);
    CHECK(report.worst_tensor == "p");
    CHECK(report.worst_index == 1);
  }
}
