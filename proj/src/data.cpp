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

#include "covx/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "covx/error.hpp"
#include "covx/format.hpp"
#include "covx/random.hpp"

namespace covx {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  s.erase(0, b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::vector<std::string>& target_columns,
                  const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (!trim(line).empty()) {
      for (auto& h : split_line(line)) header.push_back(trim(h));
      break;
    }
  }
  if (header.empty()) throw ConfigError(source + ": empty file");
  if (target_columns.empty()) throw ConfigError(source + ": no target column given");

  std::vector<std::size_t> target_idx;
  for (const auto& t : target_columns) {
    const auto it = std::ranges::find(header, t);
    if (it == header.end()) throw ConfigError(source + ": missing target column '" + t + "'");
    target_idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<std::size_t> feature_idx;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (std::ranges::find(target_idx, c) == target_idx.end()) feature_idx.push_back(c);
  if (feature_idx.empty()) throw ConfigError(source + ": no feature columns");

  Vector xs, ys;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw ConfigError(source + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    Vector values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_double(cells[c], values[c]) || !std::isfinite(values[c]))
        throw ConfigError(source + ": line " + std::to_string(line_no) + ", column '" + header[c] +
                          "': cannot parse '" + trim(cells[c]) + "' as a number");
    }
    for (std::size_t c : feature_idx) xs.push_back(values[c]);
    for (std::size_t c : target_idx) ys.push_back(values[c]);
    ++rows;
  }
  if (rows == 0) throw ConfigError(source + ": no data rows");

  Dataset ds;
  ds.x = Matrix::from_row_major(rows, feature_idx.size(), xs);
  ds.y = Matrix::from_row_major(rows, target_idx.size(), ys);
  for (std::size_t c : feature_idx) ds.feature_names.push_back(header[c]);
  ds.target_names = target_columns;
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& target_columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), target_columns, path.string());
}

std::string to_csv(const Dataset& ds) {
  std::ostringstream out;
  std::vector<std::string> names = ds.feature_names;
  names.insert(names.end(), ds.target_names.begin(), ds.target_names.end());
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < ds.x.cols(); ++c) out << (c ? "," : "") << format_double(ds.x(r, c));
    for (std::size_t c = 0; c < ds.y.cols(); ++c) out << ',' << format_double(ds.y(r, c));
    out << '\n';
  }
  return out.str();
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_csv(ds);
}

SplitIndices shuffle_split(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x5b1}));
  std::ranges::shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 2 || n - n_train < 2)
    throw ConfigError("split leaves fewer than 2 rows on one side (" + std::to_string(n) + " rows)");
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.test.assign(order.begin() + n_train, order.end());
  return s;
}

ColumnStats fit_standardization(const Matrix& x) {
  ColumnStats stats{Vector(x.cols()), Vector(x.cols())};
  const Matrix t = x.transposed();
  const double n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const double mean = pairwise_sum(t.row(c)) / n;
    Vector sq(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) sq[r] = (t(c, r) - mean) * (t(c, r) - mean);
    double sd = std::sqrt(pairwise_sum(sq) / n);
    if (!(sd > 0.0)) {
      warn("feature column " + std::to_string(c) + " has zero variance; std clamped to 1");
      sd = 1.0;
    }
    stats.mean[c] = mean;
    stats.std[c] = sd;
  }
  return stats;
}

Matrix apply_standardization(const Matrix& x, const ColumnStats& stats) {
  if (stats.mean.size() != x.cols()) throw DimensionError("standardization width mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - stats.mean[c]) / stats.std[c];
  return out;
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.x = Matrix(rows.size(), ds.x.cols());
  out.y = Matrix(rows.size(), ds.y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= ds.size()) throw DimensionError("split index " + std::to_string(rows[i]) + " out of range");
    std::ranges::copy(ds.x.row(rows[i]), out.x.row(i).begin());
    std::ranges::copy(ds.y.row(rows[i]), out.y.row(i).begin());
  }
  out.feature_names = ds.feature_names;
  out.target_names = ds.target_names;
  return out;
}

}  // namespace

SplitResult split_standardize(const Dataset& ds, const SplitIndices& indices) {
  if (indices.train.size() < 2 || indices.test.size() < 2)
    throw ConfigError("each split needs at least 2 rows");
  SplitResult res{take_rows(ds, indices.train), take_rows(ds, indices.test), indices};
  const ColumnStats stats = fit_standardization(res.train.x);
  res.train.x = apply_standardization(res.train.x, stats);
  res.test.x = apply_standardization(res.test.x, stats);
  res.train.standardization = stats;
  res.test.standardization = stats;
  return res;
}

SplitResult split_standardize(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  return split_standardize(ds, shuffle_split(ds.size(), train_fraction, seed));
}

nlohmann::json split_sidecar(const SplitResult& split, std::uint64_t seed, double train_fraction) {
  const ColumnStats& stats = *split.train.standardization;
  return {{"seed", seed},
          {"train_fraction", train_fraction},
          {"feature_names", split.train.feature_names},
          {"target_names", split.train.target_names},
          {"column_stats", {{"mean", stats.mean}, {"std", stats.std}}},
          {"split", {{"train", split.indices.train}, {"test", split.indices.test}}}};
}

SplitResult apply_sidecar(const Dataset& ds, const nlohmann::json& sidecar) {
  try {
    SplitIndices idx{sidecar.at("split").at("train").get<std::vector<std::size_t>>(),
                     sidecar.at("split").at("test").get<std::vector<std::size_t>>()};
    SplitResult res = split_standardize(ds, idx);
    const ColumnStats stored{sidecar.at("column_stats").at("mean").get<Vector>(),
                             sidecar.at("column_stats").at("std").get<Vector>()};
    if (stored.mean != res.train.standardization->mean || stored.std != res.train.standardization->std)
      throw ConfigError("split sidecar statistics do not match this dataset");
    return res;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("split sidecar: ") + e.what());
  }
}

Dataset affine_quadruple_map(const Dataset& ds) {
  Dataset out;
  out.y = ds.y;
  out.target_names = ds.target_names;
  out.x = Matrix(ds.size(), 4 * ds.x.cols());
  static constexpr const char* kSuffix[4] = {"_1m", "_1p", "_2m", "_2p"};
  for (std::size_t c = 0; c < ds.x.cols(); ++c) {
    const std::string name = c < ds.feature_names.size() ? ds.feature_names[c] : "x" + std::to_string(c);
    for (const char* s : kSuffix) out.feature_names.push_back(name + s);
  }
  for (std::size_t r = 0; r < ds.size(); ++r)
    for (std::size_t c = 0; c < ds.x.cols(); ++c) {
      const double v = ds.x(r, c);
      out.x(r, 4 * c + 0) = 1.0 - v;
      out.x(r, 4 * c + 1) = 1.0 + v;
      out.x(r, 4 * c + 2) = 2.0 - v;
      out.x(r, 4 * c + 3) = 2.0 + v;
    }
  return out;
}

Matrix affine_quadruple_inverse(const Matrix& mapped) {
  if (mapped.cols() % 4 != 0) throw DimensionError("mapped width must be a multiple of 4");
  Matrix x(mapped.rows(), mapped.cols() / 4);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = (mapped(r, 4 * c + 1) - mapped(r, 4 * c)) / 2.0;
  return x;
}

LinearEnsembleFixture linear_ensemble_from_weights(const Matrix& weights) {
  const std::size_t m = weights.rows();
  const std::size_t d = weights.cols();
  if (m < 2 || d < 1) throw ConfigError("linear ensemble needs M >= 2 and d >= 1");
  std::vector<Mlp> members;
  for (std::size_t k = 0; k < m; ++k) {
    DenseLayer layer{Matrix::from_row_major(1, d, weights.row(k)), Vector{0.0}, Activation::kIdentity};
    members.emplace_back(std::vector<DenseLayer>{std::move(layer)});
  }
  // Brute-force covariance of the stored rows.
  Vector mean(d, 0.0);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < d; ++i) mean[i] += weights(k, i) / static_cast<double>(m);
  Matrix cov(d, d, 0.0);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        cov(i, j) += (weights(k, i) - mean[i]) * (weights(k, j) - mean[j]) / static_cast<double>(m);
  return {EnsembleModel::deep_ensemble(std::move(members)), std::move(cov), weights};
}

LinearEnsembleFixture synth_linear_ensemble(std::size_t d, std::size_t m, std::uint64_t weight_seed) {
  if (d < 2 || m < 2) throw ConfigError("synth_linear_ensemble: d and M must be >= 2");
  Rng rng(derive_seed(weight_seed, {0x11e}));
  std::normal_distribution<double> normal;
  Matrix w(m, d);
  for (double& v : w.values()) v = normal(rng);
  return linear_ensemble_from_weights(w);
}

Dataset synth_regression(std::size_t n, std::uint64_t seed) {
  constexpr std::size_t kFeatures = 11;
  Rng rng(derive_seed(seed, {0x5e9}));
  std::normal_distribution<double> normal;
  std::student_t_distribution<double> heavy(3.0);
  Dataset ds;
  ds.x = Matrix(n, kFeatures);
  ds.y = Matrix(n, 1);
  for (std::size_t c = 0; c < kFeatures; ++c) ds.feature_names.push_back("x" + std::to_string(c));
  ds.target_names = {"y"};
  for (std::size_t r = 0; r < n; ++r) {
    auto x = ds.x.row(r);
    x[0] = normal(rng);
    x[1] = 0.6 * x[0] + 0.8 * normal(rng);
    x[2] = normal(rng);
    x[3] = heavy(rng);
    x[4] = std::exp(0.75 * normal(rng));
    x[5] = heavy(rng);
    x[6] = normal(rng);
    x[7] = 0.5 * x[6] + std::sqrt(0.75) * normal(rng);
    x[8] = normal(rng);
    x[9] = std::exp(0.5 * normal(rng));
    x[10] = normal(rng);
    ds.y(r, 0) = 1.0 * x[0] - 0.7 * x[1] + 0.5 * x[0] * x[2] + 0.8 * std::sin(1.5 * x[2]) +
                 0.6 * std::tanh(x[3]) + 0.4 * std::log(x[4]) * x[6] + 0.3 * x[5] +
                 0.25 * x[7] * x[7] + 0.2 * x[9] + 0.1 * normal(rng);
  }
  return ds;
}

}  // namespace covx
