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

#include "covx/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "covx/ensemble.hpp"
#include "covx/error.hpp"

namespace covx::kernels {

void set_num_threads(std::size_t n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(static_cast<int>(n));
#else
  (void)n;
#endif
}

std::size_t max_threads() {
#ifdef _OPENMP
  return static_cast<std::size_t>(omp_get_max_threads());
#else
  return 1;
#endif
}

namespace {

void check_rows(const Matrix& rows) {
  if (rows.rows() < 2) throw ConfigError("covariance needs at least two explanations");
}

// d x M matrix of deviations from the per-feature mean.
Matrix centered_by_feature(const Matrix& rows) {
  const Matrix t = rows.transposed();
  Matrix c(t.rows(), t.cols());
  const double inv_m = 1.0 / static_cast<double>(t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const auto [lo, hi] = std::ranges::minmax(t.row(i));
    // Constant features center to exact zeros.
    const double mean = lo == hi ? lo : pairwise_sum(t.row(i)) * inv_m;
    for (std::size_t m = 0; m < t.cols(); ++m) c(i, m) = t(i, m) - mean;
  }
  return c;
}

void covariance_row(const Matrix& c, std::size_t i, Vector& scratch, Matrix& out) {
  const std::size_t m_count = c.cols();
  const double inv_m = 1.0 / static_cast<double>(m_count);
  scratch.resize(m_count);
  const auto ci = c.row(i);
  for (std::size_t j = i; j < c.rows(); ++j) {
    const auto cj = c.row(j);
    for (std::size_t m = 0; m < m_count; ++m) scratch[m] = ci[m] * cj[m];
    const double v = pairwise_sum(scratch) * inv_m;
    out(i, j) = v;
    out(j, i) = v;
  }
}

void double_sum_row(const Matrix& t, const Matrix& b, std::size_t i, Vector& scratch, Matrix& out) {
  const std::size_t m_count = t.cols();
  scratch.resize(m_count * m_count);
  const auto ti = t.row(i);
  for (std::size_t j = 0; j < t.rows(); ++j) {
    const auto tj = t.row(j);
    for (std::size_t m = 0; m < m_count; ++m)
      for (std::size_t k = 0; k < m_count; ++k) scratch[m * m_count + k] = b(m, k) * ti[m] * tj[k];
    out(i, j) = pairwise_sum(scratch);
  }
}

}  // namespace

namespace serial {

Matrix covariance(const Matrix& rows) {
  check_rows(rows);
  const Matrix c = centered_by_feature(rows);
  Matrix out(c.rows(), c.rows());
  Vector scratch;
  for (std::size_t i = 0; i < c.rows(); ++i) covariance_row(c, i, scratch, out);
  return out;
}

Matrix coefficient_double_sum(const Matrix& rows) {
  check_rows(rows);
  const Matrix t = rows.transposed();
  const Matrix b = coefficients(rows.rows());
  Matrix out(t.rows(), t.rows());
  Vector scratch;
  for (std::size_t i = 0; i < t.rows(); ++i) double_sum_row(t, b, i, scratch, out);
  return out;
}

Matrix predict_batch(const Mlp& mlp, const Matrix& x, const DropoutPlan* plan) {
  Matrix out(x.rows(), mlp.output_dim());
  for (std::size_t r = 0; r < x.rows(); ++r) std::ranges::copy(predict(mlp, x.row(r), plan), out.row(r).begin());
  return out;
}

}  // namespace serial

namespace parallel {

Matrix covariance(const Matrix& rows) {
  check_rows(rows);
  const Matrix c = centered_by_feature(rows);
  const auto d = static_cast<std::ptrdiff_t>(c.rows());
  Matrix out(c.rows(), c.rows());
#pragma omp parallel
  {
    Vector scratch;
    // Row i touches d - i entries; dynamic scheduling balances the triangle.
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < d; ++i) covariance_row(c, static_cast<std::size_t>(i), scratch, out);
  }
  return out;
}

Matrix coefficient_double_sum(const Matrix& rows) {
  check_rows(rows);
  const Matrix t = rows.transposed();
  const Matrix b = coefficients(rows.rows());
  const auto d = static_cast<std::ptrdiff_t>(t.rows());
  Matrix out(t.rows(), t.rows());
#pragma omp parallel
  {
    Vector scratch;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < d; ++i) double_sum_row(t, b, static_cast<std::size_t>(i), scratch, out);
  }
  return out;
}

Matrix predict_batch(const Mlp& mlp, const Matrix& x, const DropoutPlan* plan) {
  if (plan != nullptr) validate_plan(mlp, *plan);
  Matrix out(x.rows(), mlp.output_dim());
  const auto n = static_cast<std::ptrdiff_t>(x.rows());
  std::vector<std::string> errors(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const auto row = static_cast<std::size_t>(r);
    try {
      std::ranges::copy(predict(mlp, x.row(row), plan), out.row(row).begin());
    } catch (const std::exception& e) {
      errors[row] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericError(e);
  return out;
}

}  // namespace parallel

}  // namespace covx::kernels
