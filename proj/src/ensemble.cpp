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

#include "covx/ensemble.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "covx/error.hpp"

namespace covx {

EnsembleModel EnsembleModel::deep_ensemble(std::vector<Mlp> members) {
  if (members.size() < 2) throw ConfigError("an ensemble needs at least two members");
  for (const auto& net : members)
    if (net.input_dim() != members.front().input_dim() ||
        net.output_dim() != members.front().output_dim())
      throw DimensionError("ensemble members disagree on input or output dimension");
  EnsembleModel model;
  model.kind_ = EnsembleKind::kDeepEnsemble;
  model.nets_ = std::move(members);
  return model;
}

EnsembleModel EnsembleModel::mc_dropout(Mlp base, std::vector<DropoutPlan> plans) {
  if (plans.size() < 2) throw ConfigError("MC dropout needs at least two plans");
  for (const auto& plan : plans) validate_plan(base, plan);
  EnsembleModel model;
  model.kind_ = EnsembleKind::kMcDropout;
  model.nets_.push_back(std::move(base));
  model.plans_ = std::move(plans);
  return model;
}

std::size_t EnsembleModel::size() const {
  return kind_ == EnsembleKind::kDeepEnsemble ? nets_.size() : plans_.size();
}

MemberView EnsembleModel::member(std::size_t m) const {
  if (m >= size()) throw std::out_of_range("ensemble member " + std::to_string(m) + " out of range");
  if (kind_ == EnsembleKind::kDeepEnsemble) return {&nets_[m], nullptr};
  return {&nets_.front(), &plans_[m]};
}

EnsembleOutputs summarize_predictions(std::span<const double> y) {
  if (y.size() < 2) throw ConfigError("variance needs at least two predictions");
  EnsembleOutputs out;
  out.y.assign(y.begin(), y.end());
  const double inv_m = 1.0 / static_cast<double>(y.size());
  out.mean = pairwise_sum(y) * inv_m;
  Vector sq(y.size());
  for (std::size_t m = 0; m < y.size(); ++m) sq[m] = (y[m] - out.mean) * (y[m] - out.mean);
  out.s2 = pairwise_sum(sq) * inv_m;
  return out;
}

double member_output(const EnsembleModel& model, std::size_t m, std::span<const double> x,
                     std::size_t output_index) {
  const MemberView v = model.member(m);
  return predict(*v.net, x, v.plan).at(output_index);
}

EnsembleOutputs predict_all(const EnsembleModel& model, std::span<const double> x,
                            std::size_t output_index) {
  if (output_index >= model.output_dim())
    throw DimensionError("output index " + std::to_string(output_index) + " out of range");
  Vector y(model.size());
  for (std::size_t m = 0; m < y.size(); ++m) y[m] = member_output(model, m, x, output_index);
  return summarize_predictions(y);
}

Matrix coefficients(std::size_t m) {
  if (m < 2) throw ConfigError("coefficients: M must be >= 2");
  const double md = static_cast<double>(m);
  Matrix b(m, m, -1.0 / (md * md));
  for (std::size_t i = 0; i < m; ++i) b(i, i) += 1.0 / md;
  return b;
}

double variance_from_coefficients(std::span<const double> y) {
  const Matrix b = coefficients(y.size());
  Vector terms;
  terms.reserve(y.size() * y.size());
  for (std::size_t m = 0; m < y.size(); ++m)
    for (std::size_t k = 0; k < y.size(); ++k) terms.push_back(b(m, k) * y[m] * y[k]);
  return pairwise_sum(terms);
}

double multidim_variance(const EnsembleModel& model, std::span<const double> x) {
  Matrix outputs(model.size(), model.output_dim());
  for (std::size_t m = 0; m < model.size(); ++m) {
    const MemberView v = model.member(m);
    const Vector y = predict(*v.net, x, v.plan);
    std::ranges::copy(y, outputs.row(m).begin());
  }
  double total = 0.0;
  Vector column(model.size());
  for (std::size_t k = 0; k < model.output_dim(); ++k) {
    for (std::size_t m = 0; m < model.size(); ++m) column[m] = outputs(m, k);
    total += summarize_predictions(column).s2;
  }
  return total;
}

Vector variance_gradient(const EnsembleModel& model, std::span<const double> x,
                         std::size_t output_index) {
  const std::size_t m_count = model.size();
  std::vector<ForwardTrace> traces;
  Vector y(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const MemberView v = model.member(m);
    traces.push_back(forward(*v.net, x, v.plan));
    y[m] = traces.back().output().at(output_index);
  }
  const EnsembleOutputs out = summarize_predictions(y);
  Vector grad(x.size(), 0.0);
  for (std::size_t m = 0; m < m_count; ++m) {
    const double w = 2.0 * (y[m] - out.mean) / static_cast<double>(m_count);
    if (w == 0.0) continue;
    const MemberView v = model.member(m);
    const Vector g = input_gradient(*v.net, traces[m], output_index, v.plan);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += w * g[i];
  }
  return grad;
}

nlohmann::json ensemble_to_json(const EnsembleModel& model) {
  nlohmann::json j;
  j["kind"] = model.kind() == EnsembleKind::kDeepEnsemble ? "deep_ensemble" : "mc_dropout";
  auto& members = j["members"] = nlohmann::json::array();
  for (const auto& net : model.nets()) members.push_back(mlp_to_json(net));
  auto& plans = j["plans"] = nlohmann::json::array();
  for (const auto& plan : model.plans()) plans.push_back(plan_to_json(plan));
  return j;
}

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

EnsembleModel ensemble_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    std::vector<Mlp> nets;
    for (const auto& member : j.at("members")) {
      if (member.contains("ref")) {
        nets.push_back(mlp_from_json(read_json_file(base_dir / member.at("ref").get<std::string>())));
      } else {
        nets.push_back(mlp_from_json(member));
      }
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "deep_ensemble") return EnsembleModel::deep_ensemble(std::move(nets));
    if (kind == "mc_dropout") {
      if (nets.size() != 1) throw ConfigError("mc_dropout ensemble must have exactly one member");
      std::vector<DropoutPlan> plans;
      for (const auto& p : j.at("plans")) plans.push_back(plan_from_json(p));
      return EnsembleModel::mc_dropout(std::move(nets.front()), std::move(plans));
    }
    throw ConfigError("unknown ensemble kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ensemble checkpoint: ") + e.what());
  }
}

}  // namespace covx
