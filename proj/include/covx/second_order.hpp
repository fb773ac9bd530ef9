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

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "covx/ensemble.hpp"
#include "covx/first_order.hpp"
#include "covx/matrix.hpp"

namespace covx {

// d x d attribution of s^2 onto feature pairs. R is the covariance of the
// members' first-order explanations, hence symmetric and PSD.
struct SecondOrderExplanation {
  Matrix r;
  double s2 = 0.0;
  MethodTag method = MethodTag::kCovGi;
};

enum class SummaryMode { kDiag, kMarg };

struct SummarizedExplanation {
  Vector scores;
  SummaryMode mode = SummaryMode::kDiag;
  MethodTag method = MethodTag::kCovGi;
};

std::string summary_name(SummaryMode mode);

// e ⊗ e'.
Matrix product_attribution(const Explanation& e, const Explanation& e_prime);

// (1/M) sum_m (e_m - mean)(e_m - mean)^T. s2 is the variance of the
// explanations' target values.
SecondOrderExplanation cov_explanation(std::span<const Explanation> explanations);

// Same matrix through sum_{m,m'} b_{mm'} e_m ⊗ e_m'. O(M^2 d^2); kept as the
// independent route for cross-checks.
SecondOrderExplanation cov_explanation_double_sum(std::span<const Explanation> explanations);

// Diag: R_ii. Marg: column sums of R.
SummarizedExplanation summarize(const SecondOrderExplanation& r, SummaryMode mode);

enum class BackendKind { kGradientInput, kLrp, kIntegratedGradients, kShapleySampling, kShapleyExact };

// First-order method plugged into the covariance.
struct Backend {
  BackendKind kind = BackendKind::kLrp;
  LrpConfig lrp;
  std::size_t ig_steps = kDefaultIgSteps;
  std::size_t svs_permutations = 0;  // 0 = default_svs_permutations(d)
  std::uint64_t seed = 0;
};

MethodTag cov_method_tag(BackendKind kind);

// E(y_m; x) for every member (per frozen plan under MC dropout).
std::vector<Explanation> member_explanations(const EnsembleModel& model, std::span<const double> x,
                                             const Backend& backend, std::size_t output_index = 0);

SecondOrderExplanation explain_uncertainty(const EnsembleModel& model, std::span<const double> x,
                                           const Backend& backend, std::size_t output_index = 0);

enum class OutputMode { kMatrix, kDiag, kMarg };

std::variant<SecondOrderExplanation, SummarizedExplanation> explain_uncertainty(
    const EnsembleModel& model, std::span<const double> x, const Backend& backend, OutputMode mode,
    std::size_t output_index = 0);

// sum over output dimensions of the per-dimension matrices.
SecondOrderExplanation explain_uncertainty_multidim(const EnsembleModel& model,
                                                    std::span<const double> x, const Backend& backend);

// {method, d, matrix, s2, diag, marg}.
nlohmann::json second_order_to_json(const SecondOrderExplanation& r);

}  // namespace covx
