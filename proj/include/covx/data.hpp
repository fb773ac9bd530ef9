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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covx/ensemble.hpp"
#include "covx/matrix.hpp"

namespace covx {

struct ColumnStats {
  Vector mean;
  Vector std;
};

struct Dataset {
  Matrix x;  // N x d
  Matrix y;  // N x T
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::optional<ColumnStats> standardization;  // set once standardized

  std::size_t size() const { return x.rows(); }
};

// Header row required; every other cell must parse as a number. Errors name
// the offending line and column.
Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& target_columns);
Dataset parse_csv(const std::string& text, const std::vector<std::string>& target_columns,
                  const std::string& source = "<memory>");

// Features first, then targets, each value in shortest round-trip form.
std::string to_csv(const Dataset& ds);
void write_csv(const Dataset& ds, const std::filesystem::path& path);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle, then the first round(fraction * N) rows go to train.
SplitIndices shuffle_split(std::size_t n, double train_fraction, std::uint64_t seed);

// Per-feature mean and std of the rows; zero std is clamped to 1 with a warning.
ColumnStats fit_standardization(const Matrix& x);
Matrix apply_standardization(const Matrix& x, const ColumnStats& stats);

struct SplitResult {
  Dataset train;
  Dataset test;
  SplitIndices indices;
};

// Statistics come from the train rows only and are applied to both splits.
SplitResult split_standardize(const Dataset& ds, double train_fraction, std::uint64_t seed);
SplitResult split_standardize(const Dataset& ds, const SplitIndices& indices);

// Sidecar {seed, train_fraction, column_stats: {mean, std}, split: {train, test}}.
nlohmann::json split_sidecar(const SplitResult& split, std::uint64_t seed, double train_fraction);
SplitResult apply_sidecar(const Dataset& ds, const nlohmann::json& sidecar);

// x -> (1 - x, 1 + x, 2 - x, 2 + x) per feature; d -> 4d.
Dataset affine_quadruple_map(const Dataset& ds);
// Inverse from the first pair: x = (m[1] - m[0]) / 2.
Matrix affine_quadruple_inverse(const Matrix& mapped);

struct LinearEnsembleFixture {
  EnsembleModel model;
  Matrix weight_covariance;  // (1/M) sum_m (w_m - mean)(w_m - mean)^T
  Matrix weights;            // M x d
};

// M bias-free single-layer identity models with N(0, 1) weights.
LinearEnsembleFixture synth_linear_ensemble(std::size_t d, std::size_t m, std::uint64_t weight_seed);
// Same, with given weight rows.
LinearEnsembleFixture linear_ensemble_from_weights(const Matrix& weights);

// Tabular regression with heavy-tailed and sparsely covered inputs, used
// when no real dataset is at hand. Columns x0..x{d-1}, target y.
Dataset synth_regression(std::size_t n, std::uint64_t seed);

}  // namespace covx
