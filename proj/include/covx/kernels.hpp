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

#pragma once

// Data-parallel kernels. Each `parallel::` routine has a `serial::` twin that
// performs the same per-entry arithmetic in the same order, so the two agree
// bit for bit at any thread count; tests and bench/ compare them.

#include <cstddef>

#include "covx/matrix.hpp"
#include "covx/nn.hpp"

namespace covx::kernels {

// Thread cap for the parallel kernels; 0 keeps the OpenMP default.
void set_num_threads(std::size_t n);
std::size_t max_threads();

namespace serial {

// rows = M explanation vectors of length d. Returns the d x d matrix
// (1/M) sum_m (e_m - mean)(e_m - mean)^T, each entry a pairwise sum over m.
Matrix covariance(const Matrix& rows);

// sum_{m,m'} b_{mm'} e_m e_m'^T with b the variance coefficients, each entry a
// pairwise sum over the M^2 terms.
Matrix coefficient_double_sum(const Matrix& rows);

// Row r of the result = predict(mlp, x.row(r), plan).
Matrix predict_batch(const Mlp& mlp, const Matrix& x, const DropoutPlan* plan = nullptr);

}  // namespace serial

namespace parallel {

Matrix covariance(const Matrix& rows);
Matrix coefficient_double_sum(const Matrix& rows);
Matrix predict_batch(const Mlp& mlp, const Matrix& x, const DropoutPlan* plan = nullptr);

}  // namespace parallel

}  // namespace covx::kernels
