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

#include "covx/first_order.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "covx/error.hpp"
#include "covx/random.hpp"

namespace covx {

std::string method_name(MethodTag tag) {
  switch (tag) {
    case MethodTag::kGradientInput: return "GI";
    case MethodTag::kSensitivity: return "SA";
    case MethodTag::kIntegratedGradients: return "IG";
    case MethodTag::kLrp: return "LRP";
    case MethodTag::kShapleyExact: return "Shapley";
    case MethodTag::kShapleySampling: return "SVS";
    case MethodTag::kVarianceHeadLrp: return "LRP-variance-head";
    case MethodTag::kVarianceHeadGi: return "GI-variance-head";
    case MethodTag::kCovGi: return "CovGI";
    case MethodTag::kCovLrp: return "CovLRP";
    case MethodTag::kCovIg: return "CovIG";
    case MethodTag::kCovSvs: return "CovSVS";
    case MethodTag::kCovShapley: return "CovShapley";
  }
  return "unknown";
}

ScalarFunction mlp_function(const Mlp& mlp, std::size_t output_index, const DropoutPlan* plan) {
  if (output_index >= mlp.output_dim())
    throw DimensionError("output index " + std::to_string(output_index) + " out of range");
  return ScalarFunction{
      [&mlp, output_index, plan](std::span<const double> x) {
        return predict(mlp, x, plan)[output_index];
      },
      [&mlp, output_index, plan](std::span<const double> x) {
        return input_gradient(mlp, x, output_index, plan);
      }};
}

ScalarFunction member_function(const EnsembleModel& model, std::size_t m, std::size_t output_index) {
  const MemberView v = model.member(m);
  return mlp_function(*v.net, output_index, v.plan);
}

ScalarFunction variance_function(const EnsembleModel& model, std::size_t output_index) {
  return ScalarFunction{
      [&model, output_index](std::span<const double> x) {
        return predict_all(model, x, output_index).s2;
      },
      [&model, output_index](std::span<const double> x) {
        return variance_gradient(model, x, output_index);
      }};
}

namespace {

Vector require_gradient(const ScalarFunction& f, std::span<const double> x) {
  if (!f.gradient) throw ConfigError("this attribution method needs a differentiable function");
  Vector g = f.gradient(x);
  if (g.size() != x.size()) throw DimensionError("gradient length does not match the input");
  for (double v : g)
    if (!std::isfinite(v)) throw NumericError("non-finite gradient");
  return g;
}

void check_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw DimensionError(std::string(what) + ": length " + std::to_string(b.size()) +
                         " does not match input length " + std::to_string(a.size()));
}

}  // namespace

Explanation gradient_x_input(const ScalarFunction& f, std::span<const double> x) {
  Vector g = require_gradient(f, x);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= x[i];
  return {std::move(g), f.value(x), MethodTag::kGradientInput, std::nullopt};
}

Explanation sensitivity(const ScalarFunction& f, std::span<const double> x, bool signed_scores) {
  Vector g = require_gradient(f, x);
  if (!signed_scores)
    for (double& v : g) v = std::abs(v);
  return {std::move(g), f.value(x), MethodTag::kSensitivity, std::nullopt};
}

Explanation integrated_gradients(const ScalarFunction& f, std::span<const double> x,
                                 std::span<const double> reference, std::size_t steps) {
  if (steps < 1) throw ConfigError("integrated_gradients: steps must be >= 1");
  const Vector origin(x.size(), 0.0);
  if (reference.empty()) reference = origin;
  check_same_length(x, reference, "integrated_gradients reference");

  const std::size_t d = x.size();
  Matrix grads(steps, d);
  Vector point(d);
  for (std::size_t t = 0; t < steps; ++t) {
    const double alpha = (static_cast<double>(t) + 0.5) / static_cast<double>(steps);
    for (std::size_t i = 0; i < d; ++i) point[i] = reference[i] + alpha * (x[i] - reference[i]);
    const Vector g = require_gradient(f, point);
    std::ranges::copy(g, grads.row(t).begin());
  }
  const Matrix by_feature = grads.transposed();
  Vector scores(d);
  for (std::size_t i = 0; i < d; ++i)
    scores[i] = (x[i] - reference[i]) * pairwise_sum(by_feature.row(i)) / static_cast<double>(steps);
  return {std::move(scores), f.value(x), MethodTag::kIntegratedGradients, std::nullopt};
}

Explanation shapley_exact(const ScalarFunction& f, std::span<const double> x,
                          std::span<const double> baseline) {
  check_same_length(x, baseline, "shapley_exact baseline");
  const std::size_t d = x.size();
  if (d > kMaxExactShapleyFeatures)
    throw ConfigError("shapley_exact: " + std::to_string(d) + " features exceed the limit of " +
                      std::to_string(kMaxExactShapleyFeatures));
  const std::size_t subsets = std::size_t{1} << d;
  Vector value(subsets);
  Vector point(d);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    for (std::size_t i = 0; i < d; ++i) point[i] = (mask >> i & 1U) ? x[i] : baseline[i];
    value[mask] = f.value(point);
  }
  // Mean marginal contribution per coalition size, then the mean over sizes.
  Vector scores(d, 0.0);
  std::vector<Vector> by_size(d);
  Vector size_means(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (auto& terms : by_size) terms.clear();
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask >> i & 1U) continue;
      const auto size = static_cast<std::size_t>(std::popcount(mask));
      by_size[size].push_back(value[mask | (std::size_t{1} << i)] - value[mask]);
    }
    for (std::size_t s = 0; s < d; ++s)
      size_means[s] = pairwise_sum(by_size[s]) / static_cast<double>(by_size[s].size());
    scores[i] = pairwise_sum(size_means) / static_cast<double>(d);
  }
  return {std::move(scores), value[subsets - 1], MethodTag::kShapleyExact, std::nullopt};
}

std::size_t default_svs_permutations(std::size_t d) { return std::max<std::size_t>(128, 16 * d); }

Explanation shapley_value_sampling(const ScalarFunction& f, std::span<const double> x,
                                   std::span<const double> baseline, std::size_t permutations,
                                   std::uint64_t seed) {
  check_same_length(x, baseline, "shapley_value_sampling baseline");
  if (permutations < 1) throw ConfigError("shapley_value_sampling: permutations must be >= 1");
  const std::size_t d = x.size();
  const double base_value = f.value(baseline);
  Matrix contributions(d, permutations);
  std::vector<std::size_t> order(d);
  Vector point(d);
  for (std::size_t p = 0; p < permutations; ++p) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, {p}));
    std::ranges::shuffle(order, rng);
    std::ranges::copy(baseline, point.begin());
    double previous = base_value;
    for (std::size_t i : order) {
      point[i] = x[i];
      const double current = f.value(point);
      contributions(i, p) = current - previous;
      previous = current;
    }
  }
  Vector scores(d);
  for (std::size_t i = 0; i < d; ++i)
    scores[i] = pairwise_sum(contributions.row(i)) / static_cast<double>(permutations);
  return {std::move(scores), f.value(x), MethodTag::kShapleySampling, std::nullopt};
}

void LrpConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("LRP gamma must be >= 0");
  for (double g : layer_gamma)
    if (!(g >= 0.0)) throw ConfigError("LRP per-layer gamma must be >= 0");
}

namespace {

double stabilize(double z, LrpStats* stats) {
  if (std::abs(z) >= kLrpStabilizer) return z;
  if (stats != nullptr) ++stats->stabilized;
  return z + (z < 0.0 ? -kLrpStabilizer : kLrpStabilizer);
}

double pos(double v) { return v > 0.0 ? v : 0.0; }
double neg(double v) { return v < 0.0 ? v : 0.0; }

// One layer of the rule. `in` are the activations feeding the layer, `r_out`
// the relevance of its neurons.
Vector propagate_layer(const DenseLayer& layer, const Vector& in, const Vector& z,
                       const Vector& r_out, double gamma, LrpVariant variant, LrpStats* stats) {
  Vector r_in(layer.fan_in(), 0.0);
  Vector contrib(layer.fan_in());
  for (std::size_t k = 0; k < layer.fan_out(); ++k) {
    if (r_out[k] == 0.0) continue;
    const auto w = layer.weights.row(k);
    const double b = layer.bias[k];
    double bias_term;
    if (variant == LrpVariant::kSimple) {
      for (std::size_t j = 0; j < in.size(); ++j) contrib[j] = in[j] * (w[j] + gamma * pos(w[j]));
      bias_term = b + gamma * pos(b);
    } else if (z[k] > 0.0) {
      for (std::size_t j = 0; j < in.size(); ++j)
        contrib[j] = pos(in[j]) * (w[j] + gamma * pos(w[j])) + neg(in[j]) * (w[j] + gamma * neg(w[j]));
      bias_term = b + gamma * pos(b);
    } else if (z[k] < 0.0) {
      for (std::size_t j = 0; j < in.size(); ++j)
        contrib[j] = pos(in[j]) * (w[j] + gamma * neg(w[j])) + neg(in[j]) * (w[j] + gamma * pos(w[j]));
      bias_term = b + gamma * neg(b);
    } else {
      continue;  // I(z > 0) = I(z < 0) = 0
    }
    double denom = bias_term;
    for (double c : contrib) denom += c;
    const double scale = r_out[k] / stabilize(denom, stats);
    for (std::size_t j = 0; j < in.size(); ++j) r_in[j] += contrib[j] * scale;
  }
  return r_in;
}

}  // namespace

Vector lrp_propagate(const Mlp& mlp, const ForwardTrace& trace, std::span<const double> output_relevance,
                     const LrpConfig& config, LrpStats* stats) {
  config.validate();
  if (output_relevance.size() != mlp.output_dim())
    throw DimensionError("lrp: output relevance length does not match output_dim");
  Vector relevance(output_relevance.begin(), output_relevance.end());
  for (std::size_t l = mlp.num_layers(); l-- > 0;) {
    const Vector& in = trace.layer_input(l);
    if (config.variant == LrpVariant::kSimple &&
        std::ranges::any_of(in, [](double a) { return a < 0.0; }))
      throw ConfigError("simple LRP-gamma needs non-negative activations but layer " +
                        std::to_string(l) +
                        " receives negative inputs; use the generalized rule for signed data");
    relevance = propagate_layer(mlp.layer(l), in, trace.layers[l].z, relevance, config.gamma_for(l),
                                config.variant, stats);
  }
  return relevance;
}

Explanation lrp(const Mlp& mlp, std::span<const double> x, std::size_t output_index,
                const LrpConfig& config, const DropoutPlan* plan, LrpStats* stats) {
  if (output_index >= mlp.output_dim())
    throw DimensionError("lrp: output index " + std::to_string(output_index) + " out of range");
  const ForwardTrace trace = forward(mlp, x, plan);
  Vector top(mlp.output_dim(), 0.0);
  top[output_index] = trace.output()[output_index];
  LrpStats local;
  Vector scores = lrp_propagate(mlp, trace, top, config, &local);
  if (local.stabilized > 0)
    warn("lrp: stabilized " + std::to_string(local.stabilized) + " near-zero denominators");
  if (stats != nullptr) stats->stabilized += local.stabilized;
  return {std::move(scores), top[output_index], MethodTag::kLrp, config.gamma};
}

Explanation variance_head_explanation(const EnsembleModel& model, std::span<const double> x,
                                      HeadBackend backend, const LrpConfig& config,
                                      std::size_t output_index) {
  const std::size_t m_count = model.size();
  if (m_count < 2) throw ConfigError("variance head needs M >= 2");
  std::vector<ForwardTrace> traces;
  Vector y(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const MemberView v = model.member(m);
    traces.push_back(forward(*v.net, x, v.plan));
    y[m] = traces.back().output().at(output_index);
  }
  const EnsembleOutputs out = summarize_predictions(y);
  const double inv_m = 1.0 / static_cast<double>(m_count);

  Matrix per_member(x.size(), m_count, 0.0);
  LrpStats stats;
  for (std::size_t m = 0; m < m_count; ++m) {
    const MemberView v = model.member(m);
    const double dev = y[m] - out.mean;
    Vector scores;
    if (backend == HeadBackend::kLrp) {
      Vector top(v.net->output_dim(), 0.0);
      top[output_index] = inv_m * dev * dev;
      scores = lrp_propagate(*v.net, traces[m], top, config, &stats);
    } else {
      scores = input_gradient(*v.net, traces[m], output_index, v.plan);
      for (std::size_t i = 0; i < scores.size(); ++i) scores[i] *= 2.0 * inv_m * dev * x[i];
    }
    for (std::size_t i = 0; i < scores.size(); ++i) per_member(i, m) = scores[i];
  }
  if (stats.stabilized > 0)
    warn("variance head lrp: stabilized " + std::to_string(stats.stabilized) + " denominators");
  Vector scores(x.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = pairwise_sum(per_member.row(i));
  Explanation e{std::move(scores), out.s2,
                backend == HeadBackend::kLrp ? MethodTag::kVarianceHeadLrp : MethodTag::kVarianceHeadGi,
                std::nullopt};
  if (backend == HeadBackend::kLrp) e.gamma = config.gamma;
  return e;
}

nlohmann::json explanation_to_json(const Explanation& e, const nlohmann::json& input_ref) {
  nlohmann::json j;
  j["method"] = method_name(e.method);
  if (e.gamma) j["gamma"] = *e.gamma;
  j["scores"] = e.scores;
  j["target_value"] = e.target_value;
  j["input_ref"] = input_ref;
  return j;
}

}  // namespace covx
