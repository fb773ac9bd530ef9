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
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "covx/matrix.hpp"
#include "covx/nn.hpp"

namespace covx {

enum class EnsembleKind { kDeepEnsemble, kMcDropout };

// One prediction instance: a network plus, for MC dropout, its frozen mask.
struct MemberView {
  const Mlp* net = nullptr;
  const DropoutPlan* plan = nullptr;
};

// M >= 2 prediction instances sharing input and output dimensions. MC-dropout
// ensembles keep their plans fixed so every consumer sees the same M functions.
class EnsembleModel {
 public:
  static EnsembleModel deep_ensemble(std::vector<Mlp> members);
  static EnsembleModel mc_dropout(Mlp base, std::vector<DropoutPlan> plans);

  EnsembleKind kind() const { return kind_; }
  std::size_t size() const;
  std::size_t input_dim() const { return nets_.front().input_dim(); }
  std::size_t output_dim() const { return nets_.front().output_dim(); }
  MemberView member(std::size_t m) const;

  const std::vector<Mlp>& nets() const { return nets_; }
  const std::vector<DropoutPlan>& plans() const { return plans_; }

 private:
  EnsembleKind kind_ = EnsembleKind::kDeepEnsemble;
  std::vector<Mlp> nets_;
  std::vector<DropoutPlan> plans_;
};

// y_m, their mean and the biased (1/M) variance.
struct EnsembleOutputs {
  Vector y;
  double mean = 0.0;
  double s2 = 0.0;
};

// Mean and 1/M variance of a prediction vector (M >= 2).
EnsembleOutputs summarize_predictions(std::span<const double> y);

EnsembleOutputs predict_all(const EnsembleModel& model, std::span<const double> x,
                            std::size_t output_index = 0);

// b_{mm'} = 1{m=m'}/M - 1/M^2.
Matrix coefficients(std::size_t m);

// sum_{m,m'} b_{mm'} y_m y_m'; the same quantity as summarize_predictions().s2.
double variance_from_coefficients(std::span<const double> y);

// Sum of per-output variances.
double multidim_variance(const EnsembleModel& model, std::span<const double> x);

// Gradient of s^2 with respect to x: (2/M) sum_m (y_m - mean) grad y_m.
Vector variance_gradient(const EnsembleModel& model, std::span<const double> x,
                         std::size_t output_index = 0);

double member_output(const EnsembleModel& model, std::size_t m, std::span<const double> x,
                     std::size_t output_index = 0);

// {kind, members: [inline checkpoints or {"ref": file}], plans: [{seed, rate, masks}]}.
nlohmann::json ensemble_to_json(const EnsembleModel& model);
EnsembleModel ensemble_from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {});

}  // namespace covx
