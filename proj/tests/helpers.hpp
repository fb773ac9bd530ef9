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

// Generators and independent oracles shared by the test binaries. Nothing here
// calls the gradient or attribution code it is used to check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "covx/ensemble.hpp"
#include "covx/matrix.hpp"
#include "covx/nn.hpp"

namespace covx::testing {

inline Vector random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(n);
  for (double& e : v) e = normal(rng);
  return v;
}

// ReLU MLP with identity head; `arch` = {d, h1, ..., out}.
inline Mlp random_mlp(std::mt19937_64& rng, const std::vector<std::size_t>& arch, bool with_bias) {
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(arch[l]));
    std::normal_distribution<double> w(0.0, scale);
    std::normal_distribution<double> b(0.0, 0.3);
    DenseLayer layer{Matrix(arch[l + 1], arch[l]), Vector(arch[l + 1], 0.0),
                     l + 2 == arch.size() ? Activation::kIdentity : Activation::kRelu};
    for (double& v : layer.weights.values()) v = w(rng);
    if (with_bias)
      for (double& v : layer.bias) v = b(rng);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

inline EnsembleModel random_ensemble(std::mt19937_64& rng, std::size_t m,
                                     const std::vector<std::size_t>& arch, bool with_bias) {
  std::vector<Mlp> members;
  for (std::size_t k = 0; k < m; ++k) members.push_back(random_mlp(rng, arch, with_bias));
  return EnsembleModel::deep_ensemble(std::move(members));
}

// Sign pattern of every ReLU pre-activation, computed by a plain forward pass.
inline std::vector<int> activation_pattern(const Mlp& mlp, std::span<const double> x,
                                           const DropoutPlan* plan = nullptr) {
  const ForwardTrace t = forward(mlp, x, plan);
  std::vector<int> pattern;
  for (std::size_t l = 0; l < mlp.num_hidden(); ++l)
    for (double z : t.layers[l].z) pattern.push_back(z > 0.0 ? 1 : (z < 0.0 ? -1 : 0));
  return pattern;
}

inline std::vector<int> ensemble_pattern(const EnsembleModel& model, std::span<const double> x) {
  std::vector<int> all;
  for (std::size_t m = 0; m < model.size(); ++m) {
    const MemberView v = model.member(m);
    const auto p = activation_pattern(*v.net, x, v.plan);
    all.insert(all.end(), p.begin(), p.end());
  }
  return all;
}

// Smallest |z| over all hidden pre-activations: distance to the nearest kink
// in pre-activation units.
inline double kink_margin(const Mlp& mlp, std::span<const double> x) {
  const ForwardTrace t = forward(mlp, x);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < mlp.num_hidden(); ++l)
    for (double z : t.layers[l].z) margin = std::min(margin, std::abs(z));
  return margin;
}

// Central differences of a scalar function.
inline Vector fd_gradient(const std::function<double(std::span<const double>)>& f,
                          std::span<const double> x, double h) {
  Vector g(x.size());
  Vector p(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = p[i];
    p[i] = xi + h;
    const double up = f(p);
    p[i] = xi - h;
    const double down = f(p);
    p[i] = xi;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Plain two-pass variance with the 1/M normalizer.
inline double naive_variance(std::span<const double> y) {
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double s = 0.0;
  for (double v : y) s += (v - mean) * (v - mean);
  return s / static_cast<double>(y.size());
}

// s^2 from direct member forward passes.
inline double direct_s2(const EnsembleModel& model, std::span<const double> x, std::size_t out = 0) {
  Vector y;
  for (std::size_t m = 0; m < model.size(); ++m) {
    const MemberView v = model.member(m);
    y.push_back(predict(*v.net, x, v.plan)[out]);
  }
  return naive_variance(y);
}

}  // namespace covx::testing
