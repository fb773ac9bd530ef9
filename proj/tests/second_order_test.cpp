/*
 * Copyright 2026 The covxplain Authors.
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
#include <random>

#include <Eigen/Dense>
#include <doctest.h>

#include "covx/error.hpp"
#include "covx/second_order.hpp"
#include "helpers.hpp"

namespace covx {
namespace {

using testing::random_ensemble;
using testing::random_mlp;
using testing::random_vector;

Mlp linear(std::initializer_list<std::initializer_list<double>> w) {
  return Mlp({DenseLayer{Matrix::from_rows(w), Vector(w.size(), 0.0), Activation::kIdentity}});
}

Explanation expl(Vector scores, double target = 0.0) {
  return {std::move(scores), target, MethodTag::kGradientInput, std::nullopt};
}

double total(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v;
  return s;
}

// Two-pass covariance of explanation vectors with the 1/M normalizer.
Matrix naive_cov(const std::vector<Vector>& e) {
  const std::size_t m = e.size(), d = e.front().size();
  Vector mean(d, 0.0);
  for (const auto& v : e)
    for (std::size_t i = 0; i < d; ++i) mean[i] += v[i] / static_cast<double>(m);
  Matrix r(d, d);
  for (const auto& v : e)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) r(i, j) += (v[i] - mean[i]) * (v[j] - mean[j]) / static_cast<double>(m);
  return r;
}

// Gradient x input per member from plain input gradients.
std::vector<Vector> gi_rows(const EnsembleModel& model, const Vector& x, std::size_t out = 0) {
  std::vector<Vector> rows;
  for (std::size_t m = 0; m < model.size(); ++m) {
    const MemberView v = model.member(m);
    Vector g = input_gradient(*v.net, x, out, v.plan);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= x[i];
    rows.push_back(g);
  }
  return rows;
}

double min_eigenvalue(const Matrix& r) {
  Eigen::MatrixXd m(r.rows(), r.cols());
  for (std::size_t i = 0; i < r.rows(); ++i)
    for (std::size_t j = 0; j < r.cols(); ++j) m(i, j) = r(i, j);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double asymmetry(const Matrix& r) {
  double worst = 0.0;
  for (std::size_t i = 0; i < r.rows(); ++i)
    for (std::size_t j = 0; j < r.cols(); ++j) worst = std::max(worst, std::abs(r(i, j) - r(j, i)));
  return worst;
}

Backend gi_backend() { return Backend{BackendKind::kGradientInput}; }

Backend lrp_backend(double gamma) {
  Backend b{BackendKind::kLrp};
  b.lrp.gamma = gamma;
  return b;
}

TEST_CASE("product attribution") {
  CHECK(product_attribution(expl({1, 0}), expl({0, 1})) == Matrix::from_rows({{0, 1}, {0, 0}}));
  CHECK(product_attribution(expl({1.5, -2}), expl({0, 0})) == Matrix(2, 2));
  const Vector a{0.5, 1.0, 0.5}, b{2.0, -1.0, 2.0};
  double brute = 0.0;
  for (double u : a)
    for (double v : b) brute += u * v;
  CHECK(brute == 6.0);
  CHECK(total(product_attribution(expl(a, 2.0), expl(b, 3.0))) == doctest::Approx(brute).epsilon(1e-15));
  CHECK_THROWS_AS(product_attribution(expl({1, 2}), expl({1})), DimensionError);
}

TEST_CASE("cov_explanation: hand cases") {
  {
    const std::vector<Explanation> e{expl({1, 0}, 1.0), expl({0, 1}, 1.0)};
    const auto r = cov_explanation(e);
    CHECK(r.r == Matrix::from_rows({{0.25, -0.25}, {-0.25, 0.25}}));
    CHECK(total(r.r) == 0.0);
    CHECK(r.s2 == 0.0);
  }
  {
    const std::vector<Explanation> e{expl({1, 0}, 1.0), expl({0, -1}, -1.0)};
    const auto r = cov_explanation(e);
    CHECK(r.r == Matrix::from_rows({{0.25, 0.25}, {0.25, 0.25}}));
    CHECK(total(r.r) == 1.0);
    CHECK(r.s2 == 1.0);
    CHECK(r.method == MethodTag::kCovGi);
  }
  {
    const std::vector<Explanation> e(4, expl({0.3, -1.7, 2.2}));
    CHECK(cov_explanation(e).r == Matrix(3, 3));
    // b rows sum to zero only up to rounding on the double-sum path.
    CHECK(max_abs(cov_explanation_double_sum(e).r.values()) <= 1e-15);
  }
  const std::vector<Explanation> one{expl({1, 0})};
  CHECK_THROWS_AS(cov_explanation(one), ConfigError);
  const std::vector<Explanation> ragged{expl({1, 0}), expl({1})};
  CHECK_THROWS_AS(cov_explanation(ragged), DimensionError);
  const std::vector<Explanation> huge{expl({1e200, 0}), expl({-1e200, 0})};
  CHECK_THROWS_AS(cov_explanation(huge), NumericError);
  CHECK_THROWS_AS(cov_explanation_double_sum(huge), NumericError);
}

TEST_CASE("covariance form equals coefficient double sum") {
  std::mt19937_64 rng(1);
  for (std::size_t m = 2; m <= 20; ++m) {
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Explanation> e;
      std::vector<Vector> raw;
      for (std::size_t k = 0; k < m; ++k) {
        raw.push_back(random_vector(rng, 6));
        e.push_back(expl(raw.back()));
      }
      const Matrix cov = cov_explanation(e).r;
      const Matrix dbl = cov_explanation_double_sum(e).r;
      CHECK(max_rel_deviation(dbl.values(), cov.values()) <= 1e-10);
      CHECK(max_rel_deviation(cov.values(), naive_cov(raw).values()) <= 1e-12);

      // Explicit sum of b-weighted outer products.
      const Matrix b = coefficients(m);
      Matrix brute(6, 6);
      for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = 0; q < m; ++q) {
          const Matrix outer = product_attribution(e[p], e[q]);
          for (std::size_t i = 0; i < 36; ++i) brute.values()[i] += b(p, q) * outer.values()[i];
        }
      CHECK(max_rel_deviation(brute.values(), cov.values()) <= 1e-10);
    }
  }
}

TEST_CASE("summarize") {
  SecondOrderExplanation r{Matrix::from_rows({{0.25, 0.25}, {0.25, 0.25}}), 1.0, MethodTag::kCovLrp};
  CHECK(summarize(r, SummaryMode::kDiag).scores == Vector{0.25, 0.25});
  const auto marg = summarize(r, SummaryMode::kMarg);
  CHECK(marg.scores == Vector{0.5, 0.5});
  CHECK(marg.scores[0] + marg.scores[1] == 1.0);
  CHECK(marg.method == MethodTag::kCovLrp);

  SecondOrderExplanation diag{Matrix::from_rows({{0.4, 0}, {0, 1.5}}), 1.9, MethodTag::kCovGi};
  CHECK(summarize(diag, SummaryMode::kDiag).scores == summarize(diag, SummaryMode::kMarg).scores);

  SecondOrderExplanation zero{Matrix(3, 3), 0.0, MethodTag::kCovGi};
  CHECK(summarize(zero, SummaryMode::kDiag).scores == Vector(3, 0.0));
  CHECK(summarize(zero, SummaryMode::kMarg).scores == Vector(3, 0.0));

  // Half-split formula against column sums on random symmetric R.
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Explanation> e;
    for (int k = 0; k < 5; ++k) e.push_back(expl(random_vector(rng, 4)));
    const auto cov = cov_explanation(e);
    const auto m = summarize(cov, SummaryMode::kMarg).scores;
    const auto dg = summarize(cov, SummaryMode::kDiag).scores;
    double msum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      double half = cov.r(i, i);
      for (std::size_t j = 0; j < 4; ++j)
        if (j != i) half += 0.5 * cov.r(i, j) + 0.5 * cov.r(j, i);
      CHECK(m[i] == doctest::Approx(half).epsilon(1e-13));
      CHECK(dg[i] >= 0.0);
      msum += m[i];
    }
    CHECK(msum == doctest::Approx(total(cov.r)).epsilon(1e-13));
  }
}

TEST_CASE("explain_uncertainty: linear closed form") {
  const auto model = EnsembleModel::deep_ensemble({linear({{1, 0}}), linear({{0, 1}})});
  const Vector x{1, 1};
  const auto r = explain_uncertainty(model, x, gi_backend());
  CHECK(r.r == Matrix::from_rows({{0.25, -0.25}, {-0.25, 0.25}}));
  CHECK(r.method == MethodTag::kCovGi);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 7);
    std::vector<Vector> w;
    std::vector<Mlp> members;
    for (std::size_t k = 0; k < m; ++k) {
      w.push_back(random_vector(rng, 4));
      members.push_back(Mlp({DenseLayer{Matrix::from_row_major(1, 4, w.back()), {0.0}, Activation::kIdentity}}));
    }
    const auto ens = EnsembleModel::deep_ensemble(std::move(members));
    const Vector p = random_vector(rng, 4);
    const Matrix cw = naive_cov(w);
    Matrix oracle(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) oracle(i, j) = cw(i, j) * p[i] * p[j];
    CHECK(max_rel_deviation(explain_uncertainty(ens, p, gi_backend()).r.values(), oracle.values()) <= 1e-12);
  }
}

TEST_CASE("explain_uncertainty: identical members give zero") {
  std::mt19937_64 rng(4);
  const Mlp net = random_mlp(rng, {4, 6, 1}, true);
  const auto model = EnsembleModel::deep_ensemble({net, net, net});
  const Vector x = random_vector(rng, 4);
  for (const Backend& b : {gi_backend(), lrp_backend(0.2), Backend{BackendKind::kIntegratedGradients},
                           Backend{BackendKind::kShapleySampling}, Backend{BackendKind::kShapleyExact}}) {
    const auto r = explain_uncertainty(model, x, b);
    CHECK(r.r == Matrix(4, 4));
    CHECK(r.s2 == 0.0);
    CHECK(r.method == cov_method_tag(b.kind));
  }
}

TEST_CASE("conservation: sum of R equals s2 for conservative backends") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto model = random_ensemble(rng, 2 + static_cast<std::size_t>(trial % 9), {5, 8, 6, 1}, false);
    const Vector x = random_vector(rng, 5);
    const double s2 = testing::direct_s2(model, x);
    const auto gi = explain_uncertainty(model, x, gi_backend());
    CHECK(std::abs(total(gi.r) - s2) <= 1e-8 * s2);
    CHECK(gi.s2 == doctest::Approx(s2).epsilon(1e-12));
    const auto l = explain_uncertainty(model, x, lrp_backend(0.2));
    CHECK(std::abs(total(l.r) - s2) <= 1e-8 * s2);
  }
}

TEST_CASE("symmetry and positive semi-definiteness") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = random_ensemble(rng, 3 + static_cast<std::size_t>(trial % 10), {8, 10, 1}, true);
    const Vector x = random_vector(rng, 8);
    for (const Backend& b : {gi_backend(), lrp_backend(0.2), Backend{BackendKind::kIntegratedGradients}}) {
      const auto r = explain_uncertainty(model, x, b);
      CHECK(asymmetry(r.r) <= 1e-12);
      CHECK(min_eigenvalue(r.r) >= -1e-9);
      for (double v : summarize(r, SummaryMode::kDiag).scores) CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("irrelevant feature has zero row and column") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dead = static_cast<std::size_t>(trial % 5);
    std::vector<Mlp> members;
    for (int k = 0; k < 4; ++k) {
      auto layers = random_mlp(rng, {5, 7, 1}, true).layers();
      for (std::size_t u = 0; u < layers[0].fan_out(); ++u) layers[0].weights(u, dead) = 0.0;
      members.emplace_back(layers);
    }
    const auto model = EnsembleModel::deep_ensemble(std::move(members));
    const Vector x = random_vector(rng, 5);
    for (const Backend& b : {gi_backend(), lrp_backend(0.2)}) {
      const auto r = explain_uncertainty(model, x, b);
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(r.r(dead, j) == 0.0);
        CHECK(r.r(j, dead) == 0.0);
      }
    }
  }
}

// Central four-point mixed second difference of s2. Returns nullopt when no
// step keeps every probe point in the activation region of x.
std::optional<Matrix> fd_hessian(const EnsembleModel& model, const Vector& x) {
  const std::size_t d = x.size();
  const auto pattern = testing::ensemble_pattern(model, x);
  for (double h = 1e-3; h > 1e-8; h *= 0.5) {
    bool stable = true;
    Matrix hess(d, d);
    for (std::size_t i = 0; i < d && stable; ++i)
      for (std::size_t j = 0; j < d && stable; ++j) {
        double acc = 0.0;
        for (double si : {1.0, -1.0})
          for (double sj : {1.0, -1.0}) {
            Vector p = x;
            p[i] += si * h;
            p[j] += sj * h;
            if (testing::ensemble_pattern(model, p) != pattern) {
              stable = false;
              break;
            }
            acc += si * sj * testing::direct_s2(model, p);
          }
        hess(i, j) = acc / (4.0 * h * h);
      }
    if (stable) return hess;
  }
  return std::nullopt;
}

TEST_CASE("CovGI equals half the Hessian of s2 times x x^T") {
  std::mt19937_64 rng(8);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const bool bias = trial % 2 == 1;
    const auto model = random_ensemble(rng, 5, {4, 10, 6, 1}, bias);
    const Vector x = random_vector(rng, 4);
    const auto hess = fd_hessian(model, x);
    if (!hess) continue;
    Matrix oracle(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) oracle(i, j) = 0.5 * (*hess)(i, j) * x[i] * x[j];
    const auto r = explain_uncertainty(model, x, gi_backend());
    CHECK(max_rel_deviation(r.r.values(), oracle.values()) <= 1e-3);
    ++checked;
  }
  CHECK(checked >= 40);
}

TEST_CASE("multidimensional targets") {
  std::mt19937_64 rng(9);
  {
    const auto model = random_ensemble(rng, 4, {3, 5, 1}, true);
    const Vector x = random_vector(rng, 3);
    CHECK(explain_uncertainty_multidim(model, x, gi_backend()).r == explain_uncertainty(model, x, gi_backend()).r);
  }
  {
    // Second output is identical in every member.
    const Mlp shared = random_mlp(rng, {3, 5, 1}, true);
    std::vector<Mlp> members;
    for (int k = 0; k < 4; ++k) {
      const Mlp own = random_mlp(rng, {3, 5, 1}, true);
      const auto& a = own.layers();
      const auto& b = shared.layers();
      Matrix w0(10, 3);
      Vector b0(10);
      for (std::size_t u = 0; u < 5; ++u) {
        for (std::size_t j = 0; j < 3; ++j) {
          w0(u, j) = a[0].weights(u, j);
          w0(u + 5, j) = b[0].weights(u, j);
        }
        b0[u] = a[0].bias[u];
        b0[u + 5] = b[0].bias[u];
      }
      Matrix w1(2, 10);
      for (std::size_t u = 0; u < 5; ++u) {
        w1(0, u) = a[1].weights(0, u);
        w1(1, u + 5) = b[1].weights(0, u);
      }
      members.emplace_back(std::vector<DenseLayer>{{w0, b0, Activation::kRelu},
                                                   {w1, {a[1].bias[0], b[1].bias[0]}, Activation::kIdentity}});
    }
    const auto model = EnsembleModel::deep_ensemble(std::move(members));
    const Vector x = random_vector(rng, 3);
    const auto both = explain_uncertainty_multidim(model, x, gi_backend());
    const auto first = explain_uncertainty(model, x, gi_backend(), 0);
    CHECK(max_rel_deviation(both.r.values(), first.r.values()) <= 1e-15);
  }
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = random_ensemble(rng, 5, {4, 7, 3}, false);
    const Vector x = random_vector(rng, 4);
    Matrix oracle(4, 4);
    double s2 = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const Matrix part = naive_cov(gi_rows(model, x, k));
      for (std::size_t i = 0; i < 16; ++i) oracle.values()[i] += part.values()[i];
      s2 += testing::direct_s2(model, x, k);
    }
    const auto r = explain_uncertainty_multidim(model, x, gi_backend());
    CHECK(max_rel_deviation(r.r.values(), oracle.values()) <= 1e-12);
    CHECK(std::abs(total(r.r) - multidim_variance(model, x)) <= 1e-8 * s2);
  }
}

TEST_CASE("mc dropout ensembles use the frozen plans") {
  std::mt19937_64 rng(10);
  const Mlp base = random_mlp(rng, {4, 30, 1}, true);
  const auto model = EnsembleModel::mc_dropout(base, sample_dropout_plans(base, 0.3, 8, 1));
  const Vector x = random_vector(rng, 4);
  const auto r = explain_uncertainty(model, x, gi_backend());
  CHECK(max_rel_deviation(r.r.values(), naive_cov(gi_rows(model, x)).values()) <= 1e-12);
  CHECK(r.s2 == doctest::Approx(testing::direct_s2(model, x)).epsilon(1e-12));
}

TEST_CASE("output modes, other backends, json") {
  std::mt19937_64 rng(11);
  const auto model = random_ensemble(rng, 4, {5, 6, 1}, true);
  const Vector x = random_vector(rng, 5);
  Backend svs{BackendKind::kShapleySampling};
  svs.seed = 3;
  const auto r = explain_uncertainty(model, x, svs);
  CHECK(r.method == MethodTag::kCovSvs);
  CHECK(explain_uncertainty(model, x, svs).r == r.r);

  const auto exact = explain_uncertainty(model, x, Backend{BackendKind::kShapleyExact});
  const double s2 = testing::direct_s2(model, x);
  // Exact Shapley with a zero baseline conserves y_m - y_m(0), not y_m.
  Vector shifted;
  for (std::size_t m = 0; m < model.size(); ++m)
    shifted.push_back(member_output(model, m, x) - member_output(model, m, Vector(5, 0.0)));
  CHECK(std::abs(total(exact.r) - testing::naive_variance(shifted)) <= 1e-9 * std::max(s2, 1e-12));

  const auto diag = std::get<SummarizedExplanation>(explain_uncertainty(model, x, lrp_backend(0.2), OutputMode::kDiag));
  const auto full = explain_uncertainty(model, x, lrp_backend(0.2));
  CHECK(diag.scores == summarize(full, SummaryMode::kDiag).scores);
  CHECK(diag.method == MethodTag::kCovLrp);
  const auto matrix = std::get<SecondOrderExplanation>(explain_uncertainty(model, x, lrp_backend(0.2), OutputMode::kMatrix));
  CHECK(matrix.r == full.r);

  const auto j = second_order_to_json(full);
  CHECK(j["method"] == "CovLRP");
  CHECK(j["d"] == 5);
  CHECK(j["matrix"].get<Vector>() == Vector(full.r.values().begin(), full.r.values().end()));
  CHECK(j["s2"] == full.s2);
  CHECK(j["marg"].get<Vector>() == summarize(full, SummaryMode::kMarg).scores);
  CHECK_THROWS_AS(explain_uncertainty(model, Vector{1.0}, gi_backend()), DimensionError);
}

}  // namespace
}  // namespace covx
