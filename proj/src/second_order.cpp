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

#include "covx/second_order.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "covx/error.hpp"
#include "covx/kernels.hpp"

namespace covx {

std::string summary_name(SummaryMode mode) { return mode == SummaryMode::kDiag ? "diag" : "marg"; }

Matrix product_attribution(const Explanation& e, const Explanation& e_prime) {
  if (e.scores.size() != e_prime.scores.size())
    throw DimensionError("product_attribution: explanation lengths differ");
  const std::size_t d = e.scores.size();
  Matrix out(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = e.scores[i] * e_prime.scores[j];
  return out;
}

namespace {

Matrix stack(std::span<const Explanation> explanations) {
  if (explanations.size() < 2) throw ConfigError("cov_explanation needs M >= 2 explanations");
  const std::size_t d = explanations.front().scores.size();
  Matrix rows(explanations.size(), d);
  for (std::size_t m = 0; m < explanations.size(); ++m) {
    if (explanations[m].scores.size() != d)
      throw DimensionError("cov_explanation: explanation " + std::to_string(m) + " has length " +
                           std::to_string(explanations[m].scores.size()) + ", expected " +
                           std::to_string(d));
    std::ranges::copy(explanations[m].scores, rows.row(m).begin());
  }
  return rows;
}

double target_variance(std::span<const Explanation> explanations) {
  Vector y;
  for (const auto& e : explanations) y.push_back(e.target_value);
  return summarize_predictions(y).s2;
}

SecondOrderExplanation checked(Matrix r, std::span<const Explanation> explanations) {
  const double s2 = target_variance(explanations);
  if (!std::isfinite(s2) || !std::ranges::all_of(r.values(), [](double v) { return std::isfinite(v); }))
    throw NumericError("uncertainty explanation is not finite; attributions overflow");
  return {std::move(r), s2, MethodTag::kCovGi};
}

MethodTag cov_tag_of(MethodTag first_order) {
  switch (first_order) {
    case MethodTag::kGradientInput: return MethodTag::kCovGi;
    case MethodTag::kLrp: return MethodTag::kCovLrp;
    case MethodTag::kIntegratedGradients: return MethodTag::kCovIg;
    case MethodTag::kShapleySampling: return MethodTag::kCovSvs;
    case MethodTag::kShapleyExact: return MethodTag::kCovShapley;
    default: return first_order;
  }
}

}  // namespace

SecondOrderExplanation cov_explanation(std::span<const Explanation> explanations) {
  SecondOrderExplanation r = checked(kernels::parallel::covariance(stack(explanations)), explanations);
  r.method = cov_tag_of(explanations.front().method);
  return r;
}

SecondOrderExplanation cov_explanation_double_sum(std::span<const Explanation> explanations) {
  SecondOrderExplanation r =
      checked(kernels::parallel::coefficient_double_sum(stack(explanations)), explanations);
  r.method = cov_tag_of(explanations.front().method);
  return r;
}

SummarizedExplanation summarize(const SecondOrderExplanation& r, SummaryMode mode) {
  const std::size_t d = r.r.rows();
  Vector scores(d);
  if (mode == SummaryMode::kDiag) {
    for (std::size_t i = 0; i < d; ++i) scores[i] = r.r(i, i);
  } else {
    const Matrix t = r.r.transposed();
    for (std::size_t i = 0; i < d; ++i) scores[i] = pairwise_sum(t.row(i));
  }
  return {std::move(scores), mode, r.method};
}

MethodTag cov_method_tag(BackendKind kind) {
  switch (kind) {
    case BackendKind::kGradientInput: return MethodTag::kCovGi;
    case BackendKind::kLrp: return MethodTag::kCovLrp;
    case BackendKind::kIntegratedGradients: return MethodTag::kCovIg;
    case BackendKind::kShapleySampling: return MethodTag::kCovSvs;
    case BackendKind::kShapleyExact: return MethodTag::kCovShapley;
  }
  return MethodTag::kCovGi;
}

std::vector<Explanation> member_explanations(const EnsembleModel& model, std::span<const double> x,
                                             const Backend& backend, std::size_t output_index) {
  if (x.size() != model.input_dim())
    throw DimensionError("explain: input length " + std::to_string(x.size()) + " != input_dim " +
                         std::to_string(model.input_dim()));
  const std::size_t m_count = model.size();
  const Vector zero(x.size(), 0.0);
  std::vector<Explanation> out(m_count);
  LrpStats stats;
  for (std::size_t m = 0; m < m_count; ++m) {
    const MemberView v = model.member(m);
    switch (backend.kind) {
      case BackendKind::kLrp:
        out[m] = lrp(*v.net, x, output_index, backend.lrp, v.plan, &stats);
        break;
      case BackendKind::kGradientInput:
        out[m] = gradient_x_input(mlp_function(*v.net, output_index, v.plan), x);
        break;
      case BackendKind::kIntegratedGradients:
        out[m] = integrated_gradients(mlp_function(*v.net, output_index, v.plan), x, zero,
                                      backend.ig_steps);
        break;
      case BackendKind::kShapleySampling: {
        const std::size_t perms = backend.svs_permutations == 0
                                      ? default_svs_permutations(x.size())
                                      : backend.svs_permutations;
        out[m] = shapley_value_sampling(mlp_function(*v.net, output_index, v.plan), x, zero, perms,
                                        backend.seed);
        break;
      }
      case BackendKind::kShapleyExact:
        out[m] = shapley_exact(mlp_function(*v.net, output_index, v.plan), x, zero);
        break;
    }
  }
  return out;
}

SecondOrderExplanation explain_uncertainty(const EnsembleModel& model, std::span<const double> x,
                                           const Backend& backend, std::size_t output_index) {
  const auto explanations = member_explanations(model, x, backend, output_index);
  SecondOrderExplanation r = cov_explanation(explanations);
  r.method = cov_method_tag(backend.kind);
  return r;
}

std::variant<SecondOrderExplanation, SummarizedExplanation> explain_uncertainty(
    const EnsembleModel& model, std::span<const double> x, const Backend& backend, OutputMode mode,
    std::size_t output_index) {
  SecondOrderExplanation r = explain_uncertainty(model, x, backend, output_index);
  switch (mode) {
    case OutputMode::kMatrix: return r;
    case OutputMode::kDiag: return summarize(r, SummaryMode::kDiag);
    case OutputMode::kMarg: return summarize(r, SummaryMode::kMarg);
  }
  return r;
}

SecondOrderExplanation explain_uncertainty_multidim(const EnsembleModel& model,
                                                    std::span<const double> x, const Backend& backend) {
  SecondOrderExplanation total = explain_uncertainty(model, x, backend, 0);
  for (std::size_t k = 1; k < model.output_dim(); ++k) {
    const SecondOrderExplanation part = explain_uncertainty(model, x, backend, k);
    auto dst = total.r.values();
    const auto src = part.r.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    total.s2 += part.s2;
  }
  return total;
}

nlohmann::json second_order_to_json(const SecondOrderExplanation& r) {
  nlohmann::json j;
  j["method"] = method_name(r.method);
  j["d"] = r.r.rows();
  j["matrix"] = std::vector<double>(r.r.values().begin(), r.r.values().end());
  j["s2"] = r.s2;
  j["diag"] = summarize(r, SummaryMode::kDiag).scores;
  j["marg"] = summarize(r, SummaryMode::kMarg).scores;
  return j;
}

}  // namespace covx
