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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "covx/ensemble.hpp"
#include "covx/matrix.hpp"
#include "covx/nn.hpp"

namespace covx {

enum class MethodTag {
  kGradientInput,
  kSensitivity,
  kIntegratedGradients,
  kLrp,
  kShapleyExact,
  kShapleySampling,
  kVarianceHeadLrp,
  kVarianceHeadGi,
  kCovGi,
  kCovLrp,
  kCovIg,
  kCovSvs,
  kCovShapley,
};

std::string method_name(MethodTag tag);

// First-order attribution of a scalar output onto d input features.
struct Explanation {
  Vector scores;
  double target_value = 0.0;
  MethodTag method = MethodTag::kGradientInput;
  std::optional<double> gamma;
};

// A scalar function of the input with an optional exact gradient.
struct ScalarFunction {
  std::function<double(std::span<const double>)> value;
  std::function<Vector(std::span<const double>)> gradient;
};

ScalarFunction mlp_function(const Mlp& mlp, std::size_t output_index = 0,
                            const DropoutPlan* plan = nullptr);
ScalarFunction member_function(const EnsembleModel& model, std::size_t m,
                               std::size_t output_index = 0);
// s^2(x) of the ensemble, with its analytic gradient.
ScalarFunction variance_function(const EnsembleModel& model, std::size_t output_index = 0);

Explanation gradient_x_input(const ScalarFunction& f, std::span<const double> x);

// |df/dx_i| by default; the signed partials when `signed_scores` is set.
Explanation sensitivity(const ScalarFunction& f, std::span<const double> x,
                        bool signed_scores = false);

inline constexpr std::size_t kDefaultIgSteps = 64;

// Midpoint-rule path integral from `reference` (origin when empty) to x.
Explanation integrated_gradients(const ScalarFunction& f, std::span<const double> x,
                                 std::span<const double> reference = {},
                                 std::size_t steps = kDefaultIgSteps);

inline constexpr std::size_t kMaxExactShapleyFeatures = 12;

// Exact Shapley values of the game v(S) = f(x_S, baseline_{not S}); d <= 12.
Explanation shapley_exact(const ScalarFunction& f, std::span<const double> x,
                          std::span<const double> baseline);

// max(128, 16 d).
std::size_t default_svs_permutations(std::size_t d);

// Permutation-sampling estimate of shapley_exact, deterministic given seed.
Explanation shapley_value_sampling(const ScalarFunction& f, std::span<const double> x,
                                   std::span<const double> baseline, std::size_t permutations,
                                   std::uint64_t seed);

enum class LrpVariant { kSimple, kGeneralized };

struct LrpConfig {
  double gamma = 0.2;
  // Optional per-layer override, indexed like Mlp::layers(); empty = uniform.
  std::vector<double> layer_gamma;
  LrpVariant variant = LrpVariant::kGeneralized;

  double gamma_for(std::size_t layer) const {
    return layer < layer_gamma.size() ? layer_gamma[layer] : gamma;
  }
  void validate() const;
};

// Denominators with |z| below this are shifted to z + eps * sign(z), sign(0) = +1.
inline constexpr double kLrpStabilizer = 1e-9;

struct LrpStats {
  std::size_t stabilized = 0;
};

// Propagates `output_relevance` (one entry per output neuron) down to the
// input with the LRP-gamma rule. The bias acts as an extra input neuron with
// activation 1 and keeps its share of relevance.
Vector lrp_propagate(const Mlp& mlp, const ForwardTrace& trace, std::span<const double> output_relevance,
                     const LrpConfig& config, LrpStats* stats = nullptr);

// Relevance initialised at y[output_index]. The simple rule throws ConfigError
// when a layer receives negative activations.
Explanation lrp(const Mlp& mlp, std::span<const double> x, std::size_t output_index,
                const LrpConfig& config, const DropoutPlan* plan = nullptr,
                LrpStats* stats = nullptr);

enum class HeadBackend { kLrp, kGradientInput };

// First-order explanation of s^2 through an appended (y_m - mean)^2 / M head
// with the mean held constant.
Explanation variance_head_explanation(const EnsembleModel& model, std::span<const double> x,
                                      HeadBackend backend, const LrpConfig& config = {},
                                      std::size_t output_index = 0);

// {method, gamma?, scores, target_value, input_ref}.
nlohmann::json explanation_to_json(const Explanation& e, const nlohmann::json& input_ref = nullptr);

}  // namespace covx
