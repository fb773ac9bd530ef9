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
#include <string>
#include <vector>

#include <json.hpp>

#include "covx/matrix.hpp"

namespace covx {

enum class Activation { kRelu, kIdentity };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

// a = act(W a_prev + b). Weights are fan_out x fan_in.
struct DenseLayer {
  Matrix weights;
  Vector bias;
  Activation activation = Activation::kRelu;

  std::size_t fan_in() const { return weights.cols(); }
  std::size_t fan_out() const { return weights.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Feed-forward ReLU regressor. Immutable once constructed; the constructor
// checks that layer shapes chain, entries are finite and the head is linear.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  std::size_t input_dim() const { return layers_.front().fan_in(); }
  std::size_t output_dim() const { return layers_.back().fan_out(); }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t num_hidden() const { return layers_.size() - 1; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  const DenseLayer& layer(std::size_t l) const { return layers_[l]; }

  // Layer widths, input first: {d, h1, ..., out}.
  std::vector<std::size_t> architecture() const;
  bool has_bias() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

// Inverted-dropout masks for the hidden layers; entries are 0 or 1/(1-rate).
struct DropoutPlan {
  double rate = 0.0;
  std::vector<Vector> masks;
  std::uint64_t seed = 0;

  friend bool operator==(const DropoutPlan&, const DropoutPlan&) = default;
};

struct LayerTrace {
  Vector z;  // pre-activation
  Vector a;  // post-activation, after the dropout mask
};

struct ForwardTrace {
  Vector input;
  std::vector<LayerTrace> layers;

  const Vector& output() const { return layers.back().a; }
  // Activations feeding layer l (the input for l == 0).
  const Vector& layer_input(std::size_t l) const { return l == 0 ? input : layers[l - 1].a; }
};

ForwardTrace forward(const Mlp& mlp, std::span<const double> x, const DropoutPlan* plan = nullptr);

// Output vector only.
Vector predict(const Mlp& mlp, std::span<const double> x, const DropoutPlan* plan = nullptr);

// d y[output_index] / d x by reverse accumulation; ReLU'(0) = 0.
Vector input_gradient(const Mlp& mlp, std::span<const double> x, std::size_t output_index,
                      const DropoutPlan* plan = nullptr);
Vector input_gradient(const Mlp& mlp, const ForwardTrace& trace, std::size_t output_index,
                      const DropoutPlan* plan = nullptr);

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  // Training-time dropout on hidden layers; 0 disables it.
  double dropout_rate = 0.0;

  void validate() const;
};

struct TrainResult {
  Mlp model;
  double best_validation_mse = 0.0;
  std::size_t best_epoch = 0;
  std::vector<double> validation_mse;  // one entry per epoch
};

// He-uniform weights scaled by fan-in, zero biases.
Mlp init_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
             std::uint64_t seed);

// Adam on mean squared error; returns the snapshot with the lowest validation
// MSE. Throws NumericError when the loss becomes non-finite.
TrainResult train(const Matrix& x, const Matrix& y, const TrainConfig& config,
                  std::span<const std::size_t> hidden);

std::vector<DropoutPlan> sample_dropout_plans(const Mlp& mlp, double rate, std::size_t count,
                                              std::uint64_t seed);

void validate_plan(const Mlp& mlp, const DropoutPlan& plan);

// Checkpoint format:
// {architecture, activations, layers: [{weights, bias}], seed, train_meta}.
nlohmann::json mlp_to_json(const Mlp& mlp, std::uint64_t seed = 0,
                           const nlohmann::json& train_meta = nlohmann::json::object());
Mlp mlp_from_json(const nlohmann::json& j);

nlohmann::json plan_to_json(const DropoutPlan& plan);
DropoutPlan plan_from_json(const nlohmann::json& j);

}  // namespace covx
