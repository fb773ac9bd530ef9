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

#include "covx/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "covx/error.hpp"
#include "covx/random.hpp"

namespace covx {

std::string activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "identity"; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + name + "'");
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DimensionError("Mlp: at least one layer required");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.fan_in() == 0 || layer.fan_out() == 0)
      throw DimensionError("Mlp: layer " + std::to_string(l) + " has an empty weight matrix");
    if (layer.bias.size() != layer.fan_out())
      throw DimensionError("Mlp: layer " + std::to_string(l) + " bias length " +
                           std::to_string(layer.bias.size()) + " != fan_out " +
                           std::to_string(layer.fan_out()));
    if (l > 0 && layer.fan_in() != layers_[l - 1].fan_out())
      throw DimensionError("Mlp: layer " + std::to_string(l) + " fan_in " +
                           std::to_string(layer.fan_in()) + " does not match previous fan_out " +
                           std::to_string(layers_[l - 1].fan_out()));
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::ranges::all_of(layer.weights.values(), finite) ||
        !std::ranges::all_of(layer.bias, finite))
      throw NumericError("Mlp: layer " + std::to_string(l) + " has non-finite parameters");
  }
  if (layers_.back().activation != Activation::kIdentity)
    throw ConfigError("Mlp: the last layer must be an identity (regression) head");
}

std::vector<std::size_t> Mlp::architecture() const {
  std::vector<std::size_t> arch{input_dim()};
  for (const auto& layer : layers_) arch.push_back(layer.fan_out());
  return arch;
}

bool Mlp::has_bias() const {
  return std::ranges::any_of(layers_, [](const DenseLayer& layer) {
    return std::ranges::any_of(layer.bias, [](double b) { return b != 0.0; });
  });
}

void validate_plan(const Mlp& mlp, const DropoutPlan& plan) {
  if (plan.masks.size() != mlp.num_hidden())
    throw DimensionError("dropout plan has " + std::to_string(plan.masks.size()) +
                         " masks for " + std::to_string(mlp.num_hidden()) + " hidden layers");
  for (std::size_t l = 0; l < plan.masks.size(); ++l)
    if (plan.masks[l].size() != mlp.layer(l).fan_out())
      throw DimensionError("dropout mask " + std::to_string(l) + " has length " +
                           std::to_string(plan.masks[l].size()) + ", layer width is " +
                           std::to_string(mlp.layer(l).fan_out()));
}

namespace {

void affine(const DenseLayer& layer, std::span<const double> in, Vector& z) {
  z.resize(layer.fan_out());
  for (std::size_t k = 0; k < layer.fan_out(); ++k) {
    const auto w = layer.weights.row(k);
    double s = layer.bias[k];
    for (std::size_t j = 0; j < in.size(); ++j) s += w[j] * in[j];
    z[k] = s;
  }
}

void activate(const DenseLayer& layer, const Vector& z, const Vector* mask, Vector& a) {
  a.resize(z.size());
  if (layer.activation == Activation::kIdentity) {
    a = z;
  } else {
    for (std::size_t k = 0; k < z.size(); ++k) a[k] = z[k] > 0.0 ? z[k] : 0.0;
  }
  if (mask != nullptr)
    for (std::size_t k = 0; k < a.size(); ++k) a[k] *= (*mask)[k];
}

void check_finite(const Vector& v, std::size_t layer) {
  for (double e : v)
    if (!std::isfinite(e))
      throw NumericError("non-finite activation in layer " + std::to_string(layer));
}

}  // namespace

ForwardTrace forward(const Mlp& mlp, std::span<const double> x, const DropoutPlan* plan) {
  if (x.size() != mlp.input_dim())
    throw DimensionError("forward: input has length " + std::to_string(x.size()) +
                         ", network expects " + std::to_string(mlp.input_dim()));
  if (plan != nullptr) validate_plan(mlp, *plan);
  ForwardTrace trace;
  trace.input.assign(x.begin(), x.end());
  trace.layers.resize(mlp.num_layers());
  for (std::size_t l = 0; l < mlp.num_layers(); ++l) {
    const DenseLayer& layer = mlp.layer(l);
    LayerTrace& t = trace.layers[l];
    affine(layer, trace.layer_input(l), t.z);
    const Vector* mask = (plan != nullptr && l < mlp.num_hidden()) ? &plan->masks[l] : nullptr;
    activate(layer, t.z, mask, t.a);
    check_finite(t.a, l);
  }
  return trace;
}

Vector predict(const Mlp& mlp, std::span<const double> x, const DropoutPlan* plan) {
  return forward(mlp, x, plan).output();
}

Vector input_gradient(const Mlp& mlp, std::span<const double> x, std::size_t output_index,
                      const DropoutPlan* plan) {
  return input_gradient(mlp, forward(mlp, x, plan), output_index, plan);
}

Vector input_gradient(const Mlp& mlp, const ForwardTrace& trace, std::size_t output_index,
                      const DropoutPlan* plan) {
  if (output_index >= mlp.output_dim())
    throw DimensionError("input_gradient: output index " + std::to_string(output_index) +
                         " out of range for output_dim " + std::to_string(mlp.output_dim()));
  Vector grad_a(mlp.output_dim(), 0.0);
  grad_a[output_index] = 1.0;
  for (std::size_t l = mlp.num_layers(); l-- > 0;) {
    const DenseLayer& layer = mlp.layer(l);
    const LayerTrace& t = trace.layers[l];
    Vector grad_z(layer.fan_out());
    for (std::size_t k = 0; k < layer.fan_out(); ++k) {
      double g = grad_a[k];
      if (plan != nullptr && l < mlp.num_hidden()) g *= plan->masks[l][k];
      if (layer.activation == Activation::kRelu && !(t.z[k] > 0.0)) g = 0.0;
      grad_z[k] = g;
    }
    Vector grad_in(layer.fan_in(), 0.0);
    for (std::size_t k = 0; k < layer.fan_out(); ++k) {
      if (grad_z[k] == 0.0) continue;
      const auto w = layer.weights.row(k);
      for (std::size_t j = 0; j < layer.fan_in(); ++j) grad_in[j] += w[j] * grad_z[k];
    }
    grad_a = std::move(grad_in);
  }
  return grad_a;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in (0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("dropout_rate must lie in [0, 1)");
}

Mlp init_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
             std::uint64_t seed) {
  if (input_dim == 0 || output_dim == 0) throw ConfigError("init_mlp: dimensions must be positive");
  Rng rng(derive_seed(seed, {0x1417}));
  std::vector<DenseLayer> layers;
  std::size_t fan_in = input_dim;
  for (std::size_t l = 0; l <= hidden.size(); ++l) {
    const bool head = l == hidden.size();
    const std::size_t fan_out = head ? output_dim : hidden[l];
    if (fan_out == 0) throw ConfigError("init_mlp: hidden widths must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    DenseLayer layer{Matrix(fan_out, fan_in), Vector(fan_out, 0.0),
                     head ? Activation::kIdentity : Activation::kRelu};
    for (double& w : layer.weights.values()) w = uniform(rng);
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return Mlp(std::move(layers));
}

namespace {

struct Moments {
  std::vector<Vector> m, v;
};

struct Gradients {
  std::vector<Vector> w;  // flattened like DenseLayer::weights
  std::vector<Vector> b;

  explicit Gradients(const std::vector<DenseLayer>& layers) {
    for (const auto& layer : layers) {
      w.emplace_back(layer.weights.values().size(), 0.0);
      b.emplace_back(layer.bias.size(), 0.0);
    }
  }
  void zero() {
    for (auto& g : w) std::ranges::fill(g, 0.0);
    for (auto& g : b) std::ranges::fill(g, 0.0);
  }
};

class Adam {
 public:
  Adam(const std::vector<DenseLayer>& layers, double lr) : lr_(lr) {
    for (const auto& layer : layers) {
      mw_.emplace_back(layer.weights.values().size(), 0.0);
      vw_.emplace_back(layer.weights.values().size(), 0.0);
      mb_.emplace_back(layer.bias.size(), 0.0);
      vb_.emplace_back(layer.bias.size(), 0.0);
    }
  }

  void step(std::vector<DenseLayer>& layers, const Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weights.values(), g.w[l], mw_[l], vw_[l], c1, c2);
      update(layers[l].bias, g.b[l], mb_[l], vb_[l], c1, c2);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  void update(std::span<double> p, const Vector& g, Vector& m, Vector& v, double c1, double c2) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }

  double lr_;
  std::uint64_t t_ = 0;
  std::vector<Vector> mw_, vw_, mb_, vb_;
};

// Unvalidated forward on raw layers (parameters change during training).
void raw_forward(const std::vector<DenseLayer>& layers, std::span<const double> x,
                 const std::vector<Vector>* masks, ForwardTrace& trace) {
  trace.input.assign(x.begin(), x.end());
  trace.layers.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    affine(layers[l], trace.layer_input(l), trace.layers[l].z);
    const Vector* mask = (masks != nullptr && l + 1 < layers.size()) ? &(*masks)[l] : nullptr;
    activate(layers[l], trace.layers[l].z, mask, trace.layers[l].a);
  }
}

double mse(const std::vector<DenseLayer>& layers, const Matrix& x, const Matrix& y,
           std::span<const std::size_t> rows) {
  ForwardTrace trace;
  double total = 0.0;
  for (std::size_t r : rows) {
    raw_forward(layers, x.row(r), nullptr, trace);
    const Vector& out = trace.output();
    for (std::size_t t = 0; t < out.size(); ++t) {
      const double e = out[t] - y(r, t);
      total += e * e;
    }
  }
  return total / static_cast<double>(rows.size() * y.cols());
}

}  // namespace

TrainResult train(const Matrix& x, const Matrix& y, const TrainConfig& config,
                  std::span<const std::size_t> hidden) {
  config.validate();
  if (x.rows() != y.rows())
    throw DimensionError("train: X has " + std::to_string(x.rows()) + " rows, y has " +
                         std::to_string(y.rows()));
  if (x.rows() < 10) throw ConfigError("train: at least 10 rows are required");
  if (y.cols() == 0) throw DimensionError("train: no target columns");

  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(config.seed, {0x7a1}));
  std::ranges::shuffle(order, rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.validation_fraction * x.rows())));
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_rows(order.begin() + n_val, order.end());
  if (train_rows.empty()) throw ConfigError("train: validation split leaves no training rows");

  std::vector<DenseLayer> layers = init_mlp(x.cols(), hidden, y.cols(), config.seed).layers();
  Gradients grads(layers);
  Adam adam(layers, config.learning_rate);
  const double keep = 1.0 - config.dropout_rate;
  std::bernoulli_distribution keep_unit(keep);
  std::vector<Vector> masks;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) masks.emplace_back(layers[l].fan_out(), 1.0);

  TrainResult result;
  result.best_validation_mse = std::numeric_limits<double>::infinity();
  std::vector<DenseLayer> best = layers;
  ForwardTrace trace;
  Vector delta, delta_in;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::ranges::shuffle(train_rows, rng);
    for (std::size_t start = 0; start < train_rows.size(); start += config.batch_size) {
      const std::size_t end = std::min(train_rows.size(), start + config.batch_size);
      const double scale = 2.0 / static_cast<double>((end - start) * y.cols());
      grads.zero();
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t r = train_rows[i];
        if (config.dropout_rate > 0.0)
          for (auto& mask : masks)
            for (double& m : mask) m = keep_unit(rng) ? 1.0 / keep : 0.0;
        raw_forward(layers, x.row(r), config.dropout_rate > 0.0 ? &masks : nullptr, trace);
        const Vector& out = trace.output();
        delta.assign(out.size(), 0.0);
        for (std::size_t t = 0; t < out.size(); ++t) delta[t] = scale * (out[t] - y(r, t));
        for (std::size_t l = layers.size(); l-- > 0;) {
          const DenseLayer& layer = layers[l];
          const LayerTrace& lt = trace.layers[l];
          if (l + 1 < layers.size()) {
            for (std::size_t k = 0; k < delta.size(); ++k) {
              if (config.dropout_rate > 0.0) delta[k] *= masks[l][k];
              if (!(lt.z[k] > 0.0)) delta[k] = 0.0;
            }
          }
          const Vector& in = trace.layer_input(l);
          auto& gw = grads.w[l];
          for (std::size_t k = 0; k < layer.fan_out(); ++k) {
            if (delta[k] == 0.0) continue;
            grads.b[l][k] += delta[k];
            double* row = gw.data() + k * layer.fan_in();
            for (std::size_t j = 0; j < layer.fan_in(); ++j) row[j] += delta[k] * in[j];
          }
          if (l == 0) break;
          delta_in.assign(layer.fan_in(), 0.0);
          for (std::size_t k = 0; k < layer.fan_out(); ++k) {
            if (delta[k] == 0.0) continue;
            const auto w = layer.weights.row(k);
            for (std::size_t j = 0; j < layer.fan_in(); ++j) delta_in[j] += w[j] * delta[k];
          }
          std::swap(delta, delta_in);
        }
      }
      adam.step(layers, grads);
    }
    const double val = mse(layers, x, y, val_rows);
    if (!std::isfinite(val))
      throw NumericError("training diverged: validation loss is " + std::to_string(val) +
                         " at epoch " + std::to_string(epoch + 1));
    result.validation_mse.push_back(val);
    if (val < result.best_validation_mse) {
      result.best_validation_mse = val;
      result.best_epoch = epoch + 1;
      best = layers;
    }
  }
  result.model = Mlp(std::move(best));
  return result;
}

std::vector<DropoutPlan> sample_dropout_plans(const Mlp& mlp, double rate, std::size_t count,
                                              std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (count < 2) throw ConfigError("at least two dropout plans are required");
  std::vector<DropoutPlan> plans;
  plans.reserve(count);
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t m = 0; m < count; ++m) {
    DropoutPlan plan{rate, {}, derive_seed(seed, {m})};
    Rng rng(plan.seed);
    std::bernoulli_distribution drop(rate);
    for (std::size_t l = 0; l < mlp.num_hidden(); ++l) {
      Vector mask(mlp.layer(l).fan_out());
      for (double& v : mask) v = drop(rng) ? 0.0 : scale;
      plan.masks.push_back(std::move(mask));
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

nlohmann::json mlp_to_json(const Mlp& mlp, std::uint64_t seed, const nlohmann::json& train_meta) {
  nlohmann::json j;
  j["architecture"] = mlp.architecture();
  auto& acts = j["activations"] = nlohmann::json::array();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& layer : mlp.layers()) {
    acts.push_back(activation_name(layer.activation));
    layers.push_back({{"weights", std::vector<double>(layer.weights.values().begin(),
                                                      layer.weights.values().end())},
                      {"bias", layer.bias}});
  }
  j["seed"] = seed;
  j["train_meta"] = train_meta;
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    const auto arch = j.at("architecture").get<std::vector<std::size_t>>();
    const auto acts = j.at("activations").get<std::vector<std::string>>();
    const auto& layers_json = j.at("layers");
    if (arch.size() < 2 || acts.size() != arch.size() - 1 || layers_json.size() != arch.size() - 1)
      throw ConfigError("checkpoint: architecture, activations and layers disagree");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
      const auto w = layers_json[l].at("weights").get<std::vector<double>>();
      DenseLayer layer{Matrix::from_row_major(arch[l + 1], arch[l], w),
                       layers_json[l].at("bias").get<Vector>(), parse_activation(acts[l])};
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

nlohmann::json plan_to_json(const DropoutPlan& plan) {
  return {{"seed", plan.seed}, {"rate", plan.rate}, {"masks", plan.masks}};
}

DropoutPlan plan_from_json(const nlohmann::json& j) {
  try {
    return DropoutPlan{j.at("rate").get<double>(), j.at("masks").get<std::vector<Vector>>(),
                       j.at("seed").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dropout plan: ") + e.what());
  }
}

}  // namespace covx
