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
#include <filesystem>
#include <limits>
#include <random>

#include <doctest.h>

#include "covx/data.hpp"
#include "covx/error.hpp"
#include "covx/second_order.hpp"
#include "helpers.hpp"

namespace covx {
namespace {

Dataset shifted_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Dataset ds;
  ds.x = Matrix(n, 3);
  ds.y = Matrix(n, 1);
  ds.feature_names = {"a", "b", "c"};
  ds.target_names = {"t"};
  for (std::size_t r = 0; r < n; ++r) {
    // Drift along the row index so train and test statistics differ.
    ds.x(r, 0) = normal(rng) + 0.01 * static_cast<double>(r);
    ds.x(r, 1) = 3.0 * normal(rng) - 2.0;
    ds.x(r, 2) = std::exp(normal(rng));
    ds.y(r, 0) = ds.x(r, 0) - ds.x(r, 1);
  }
  return ds;
}

TEST_CASE("csv parsing") {
  const Dataset ds = parse_csv("a,b,t\n1,2,3\n4,5,6\n7,8.5,-9e-3\n", {"t"});
  CHECK(ds.x.rows() == 3);
  CHECK(ds.x.cols() == 2);
  CHECK(ds.y.rows() == 3);
  CHECK(ds.y.cols() == 1);
  CHECK(ds.x(2, 1) == 8.5);
  CHECK(ds.y(2, 0) == -9e-3);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});

  const Dataset mid = parse_csv("t,a,b\r\n1, 2 ,3\r\n4,5,6\r\n", {"t"});
  CHECK(mid.x(0, 0) == 2.0);
  CHECK(mid.y(1, 0) == 4.0);

  try {
    parse_csv("a,b,t\n1,2,3\n4,oops,6\n", {"t"}, "f.csv");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("", {"t"}), ConfigError);
  CHECK_THROWS_AS(parse_csv("a,b\n1,2\n", {"t"}), ConfigError);
  CHECK_THROWS_AS(parse_csv("a,t\n1,2,3\n", {"t"}), ConfigError);
  CHECK_THROWS_AS(parse_csv("a,t\n1,nan\n", {"t"}), ConfigError);
  CHECK_THROWS_AS(parse_csv("a,t\n", {"t"}), ConfigError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", {"t"}), ConfigError);
}

TEST_CASE("csv round-trip is bit exact") {
  Dataset ds = shifted_dataset(50, 1);
  ds.x(0, 0) = 0.1;
  ds.x(1, 1) = -1.0 / 3.0;
  ds.x(2, 2) = std::numeric_limits<double>::denorm_min();
  ds.x(3, 0) = 1e300;
  const auto path = std::filesystem::temp_directory_path() / "covx_roundtrip.csv";
  write_csv(ds, path);
  const Dataset back = load_csv(path, {"t"});
  std::filesystem::remove(path);
  CHECK(back.x == ds.x);
  CHECK(back.y == ds.y);
  CHECK(back.feature_names == ds.feature_names);
}

TEST_CASE("split and standardize") {
  const Dataset ds = shifted_dataset(200, 2);
  const SplitResult split = split_standardize(ds, 0.75, 5);
  CHECK(split.train.size() == 150);
  CHECK(split.test.size() == 50);

  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 150; ++r) mean += split.train.x(r, c) / 150.0;
    double var = 0.0;
    for (std::size_t r = 0; r < 150; ++r) var += std::pow(split.train.x(r, c) - mean, 2) / 150.0;
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-10);
  }
  // Test rows use the train statistics.
  const ColumnStats& stats = *split.train.standardization;
  for (std::size_t r = 0; r < 50; ++r) {
    const std::size_t src = split.indices.test[r];
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(split.test.x(r, c) == (ds.x(src, c) - stats.mean[c]) / stats.std[c]);
  }
  double test_mean = 0.0;
  for (std::size_t r = 0; r < 50; ++r) test_mean += split.test.x(r, 0) / 50.0;
  CHECK(test_mean != 0.0);
  // Targets are carried through unchanged.
  CHECK(split.train.y(0, 0) == ds.y(split.indices.train[0], 0));

  CHECK(split_standardize(ds, 0.75, 5).indices.train == split.indices.train);
  CHECK(split_standardize(ds, 0.75, 6).indices.train != split.indices.train);

  CHECK_THROWS_AS(split_standardize(ds, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_standardize(ds, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(split_standardize(shifted_dataset(4, 1), 0.9, 1), ConfigError);
}

TEST_CASE("no test statistic influences standardization") {
  const Dataset ds = shifted_dataset(100, 3);
  const SplitResult a = split_standardize(ds, 0.5, 7);
  Dataset poisoned = ds;
  for (std::size_t r : a.indices.test) poisoned.x(r, 0) = 1e6;
  const SplitResult b = split_standardize(poisoned, a.indices);
  CHECK(b.train.standardization->mean == a.train.standardization->mean);
  CHECK(b.train.standardization->std == a.train.standardization->std);
  CHECK(b.train.x == a.train.x);
}

TEST_CASE("explicit split indices and sidecar") {
  const Dataset ds = shifted_dataset(40, 4);
  SplitIndices idx;
  for (std::size_t r = 0; r < 40; ++r) (r < 30 ? idx.train : idx.test).push_back(r);
  const SplitResult split = split_standardize(ds, idx);
  CHECK(split.train.x(0, 1) == (ds.x(0, 1) - split.train.standardization->mean[1]) / split.train.standardization->std[1]);
  idx.test.push_back(99);
  CHECK_THROWS_AS(split_standardize(ds, idx), DimensionError);

  const SplitResult seeded = split_standardize(ds, 0.75, 8);
  const auto sidecar = nlohmann::json::parse(split_sidecar(seeded, 8, 0.75).dump());
  const SplitResult again = apply_sidecar(ds, sidecar);
  CHECK(again.train.x == seeded.train.x);
  CHECK(again.test.x == seeded.test.x);
  Dataset other = ds;
  other.x(seeded.indices.train[0], 0) += 1.0;
  CHECK_THROWS_AS(apply_sidecar(other, sidecar), ConfigError);
}

TEST_CASE("zero-variance feature is clamped") {
  Matrix x(10, 2);
  for (std::size_t r = 0; r < 10; ++r) {
    x(r, 0) = static_cast<double>(r);
    x(r, 1) = 4.0;
  }
  set_warnings_quiet(true);
  const std::size_t before = warning_count();
  const ColumnStats stats = fit_standardization(x);
  set_warnings_quiet(false);
  CHECK(warning_count() == before + 1);
  CHECK(stats.std[1] == 1.0);
  CHECK(apply_standardization(x, stats)(3, 1) == 0.0);
}

TEST_CASE("affine quadruple map") {
  Dataset ds;
  ds.x = Matrix::from_rows({{1.0, 0.0}, {-0.3, 2.5}});
  ds.y = Matrix(2, 1);
  ds.feature_names = {"p", "q"};
  const Dataset m = affine_quadruple_map(ds);
  CHECK(m.x.cols() == 8);
  CHECK(m.feature_names[0] == "p_1m");
  CHECK(m.feature_names[7] == "q_2p");
  CHECK(std::vector<double>(m.x.row(0).begin(), m.x.row(0).begin() + 4) == Vector{0, 2, 1, 3});
  CHECK(std::vector<double>(m.x.row(0).begin() + 4, m.x.row(0).end()) == Vector{1, 1, 2, 2});
  CHECK(affine_quadruple_inverse(m.x)(0, 0) == 1.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 3.0);
  Dataset big;
  big.x = Matrix(500, 3);
  for (double& v : big.x.values()) v = normal(rng);
  big.x(0, 0) = 1e-300;
  big.x(0, 1) = -1e200;
  big.y = Matrix(500, 1);
  const Dataset mapped = affine_quadruple_map(big);
  for (std::size_t r = 0; r < 500; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      bool nonzero = false;
      for (std::size_t k = 0; k < 4; ++k) nonzero = nonzero || mapped.x(r, 4 * c + k) != 0.0;
      CHECK(nonzero);
    }
  // Exact up to the rounding of 1 +/- x.
  const Matrix back = affine_quadruple_inverse(mapped.x);
  for (std::size_t i = 0; i < back.values().size(); ++i) {
    const double v = big.x.values()[i];
    CHECK(std::abs(back.values()[i] - v) <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(v)));
  }
  CHECK_THROWS_AS(affine_quadruple_inverse(Matrix(1, 3)), DimensionError);
}

TEST_CASE("linear ensemble fixtures") {
  const auto hand = linear_ensemble_from_weights(Matrix::from_rows({{1, 0}, {0, 1}}));
  CHECK(hand.weight_covariance == Matrix::from_rows({{0.25, -0.25}, {-0.25, 0.25}}));
  const auto shared = linear_ensemble_from_weights(Matrix::from_rows({{0.3, -2}, {0.3, -2}, {0.3, -2}}));
  CHECK(max_abs(shared.weight_covariance.values()) == 0.0);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto fx = synth_linear_ensemble(6, 5, seed);
    CHECK(fx.model.size() == 5);
    // Recompute the covariance from the member checkpoints themselves.
    std::vector<Vector> w;
    for (const Mlp& net : fx.model.nets()) {
      const auto row = net.layer(0).weights.row(0);
      w.emplace_back(row.begin(), row.end());
    }
    Vector mean(6, 0.0);
    for (const auto& v : w)
      for (std::size_t i = 0; i < 6; ++i) mean[i] += v[i];
    for (double& v : mean) v /= 5.0;
    Matrix cov(6, 6);
    for (const auto& v : w)
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) cov(i, j) += (v[i] - mean[i]) * (v[j] - mean[j]);
    for (double& v : cov.values()) v /= 5.0;
    CHECK(max_rel_deviation(fx.weight_covariance.values(), cov.values()) <= 1e-14);
  }
  CHECK(synth_linear_ensemble(4, 3, 1).weights == synth_linear_ensemble(4, 3, 1).weights);
  CHECK_THROWS_AS(synth_linear_ensemble(1, 3, 1), ConfigError);
  CHECK_THROWS_AS(synth_linear_ensemble(3, 1, 1), ConfigError);
}

TEST_CASE("synthetic regression data") {
  const Dataset a = synth_regression(2000, 0);
  CHECK(a.size() == 2000);
  CHECK(a.x.cols() == 11);
  CHECK(a.y.cols() == 1);
  for (double v : a.x.values()) CHECK(std::isfinite(v));
  CHECK(synth_regression(50, 3).x == synth_regression(50, 3).x);
  CHECK(synth_regression(50, 3).x != synth_regression(50, 4).x);
}

}  // namespace
}  // namespace covx
