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

#include <random>

#include <doctest.h>

#include "covx/ensemble.hpp"
#include "covx/kernels.hpp"
#include "helpers.hpp"

namespace covx {
namespace {

Matrix random_rows(std::mt19937_64& rng, std::size_t m, std::size_t d) {
  Matrix rows(m, d);
  std::normal_distribution<double> normal(0.3, 2.0);
  for (double& v : rows.values()) v = normal(rng);
  return rows;
}

TEST_CASE("serial and parallel kernels are bit identical") {
  std::mt19937_64 rng(1);
  for (std::size_t threads : {1u, 2u, 3u, 8u}) {
    kernels::set_num_threads(threads);
    for (auto [m, d] : {std::pair<std::size_t, std::size_t>{2, 1}, {5, 7}, {20, 33}, {64, 100}}) {
      const Matrix rows = random_rows(rng, m, d);
      CHECK(kernels::parallel::covariance(rows) == kernels::serial::covariance(rows));
      CHECK(kernels::parallel::coefficient_double_sum(rows) == kernels::serial::coefficient_double_sum(rows));
    }
    const Mlp net = testing::random_mlp(rng, {6, 32, 16, 2}, true);
    const Matrix x = random_rows(rng, 257, 6);
    CHECK(kernels::parallel::predict_batch(net, x) == kernels::serial::predict_batch(net, x));
    const auto plans = sample_dropout_plans(net, 0.2, 2, 4);
    CHECK(kernels::parallel::predict_batch(net, x, &plans[1]) == kernels::serial::predict_batch(net, x, &plans[1]));
  }
  kernels::set_num_threads(kernels::max_threads());
}

TEST_CASE("kernels agree with plain loops") {
  std::mt19937_64 rng(2);
  const Matrix rows = random_rows(rng, 9, 5);
  Vector mean(5, 0.0);
  for (std::size_t m = 0; m < 9; ++m)
    for (std::size_t i = 0; i < 5; ++i) mean[i] += rows(m, i) / 9.0;
  Matrix oracle(5, 5);
  for (std::size_t m = 0; m < 9; ++m)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) oracle(i, j) += (rows(m, i) - mean[i]) * (rows(m, j) - mean[j]) / 9.0;
  CHECK(max_rel_deviation(kernels::serial::covariance(rows).values(), oracle.values()) <= 1e-13);
  CHECK(max_rel_deviation(kernels::serial::coefficient_double_sum(rows).values(), oracle.values()) <= 1e-12);

  const Mlp net = testing::random_mlp(rng, {5, 8, 2}, true);
  const Matrix batch = kernels::serial::predict_batch(net, rows);
  for (std::size_t r = 0; r < 9; ++r) {
    const Vector y = predict(net, rows.row(r));
    CHECK(batch(r, 0) == y[0]);
    CHECK(batch(r, 1) == y[1]);
  }
}

}  // namespace
}  // namespace covx
