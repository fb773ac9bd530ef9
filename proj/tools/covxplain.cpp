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

// covxplain: train ensembles, explain their predictive variance, and run the
// feature-flipping benchmark. Exit codes: 0 success, 2 usage or configuration
// error, 3 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "covx/data.hpp"
#include "covx/ensemble.hpp"
#include "covx/error.hpp"
#include "covx/evaluation.hpp"
#include "covx/first_order.hpp"
#include "covx/format.hpp"
#include "covx/kernels.hpp"
#include "covx/nn.hpp"
#include "covx/random.hpp"
#include "covx/second_order.hpp"
#include "covx/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace covx::cli {
namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) parts.push_back(item);
  return parts;
}

std::vector<std::size_t> parse_arch(const std::string& text) {
  std::vector<std::size_t> arch;
  for (const auto& part : split_commas(text)) {
    double v = 0.0;
    if (!parse_double(part, v) || v < 1.0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw ConfigError("--arch expects comma-separated positive integers, got '" + text + "'");
    arch.push_back(static_cast<std::size_t>(v));
  }
  if (arch.empty()) throw ConfigError("--arch is empty");
  return arch;
}

Vector parse_vector(const std::string& text) {
  Vector out;
  for (const auto& part : split_commas(text)) {
    double v = 0.0;
    if (!parse_double(part, v) || !std::isfinite(v)) throw ConfigError("cannot parse '" + part + "' as a number");
    out.push_back(v);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
}

std::size_t resolve_threads(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("COVXPLAIN_THREADS")) {
    double v = 0.0;
    if (!parse_double(env, v) || v < 1.0) throw ConfigError("COVXPLAIN_THREADS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return kernels::max_threads();
}

// Accepts either the manifest file or the directory holding ensemble.json.
fs::path manifest_path(const fs::path& model) {
  return fs::is_directory(model) ? model / "ensemble.json" : model;
}

EnsembleModel load_ensemble(const fs::path& model) {
  const fs::path path = manifest_path(model);
  return ensemble_from_json(read_json(path), path.parent_path());
}

json ensemble_summary(const EnsembleModel& model) {
  return {{"kind", model.kind() == EnsembleKind::kDeepEnsemble ? "deep_ensemble" : "mc_dropout"},
          {"members", model.size()},
          {"input_dim", model.input_dim()},
          {"output_dim", model.output_dim()}};
}

// Standardized split of `data` as recorded next to the model.
SplitResult load_split(const fs::path& model, const fs::path& data) {
  const fs::path sidecar_path = manifest_path(model).parent_path() / "split.json";
  const json sidecar = read_json(sidecar_path);
  const auto targets = sidecar.at("target_names").get<std::vector<std::string>>();
  return apply_sidecar(load_csv(data, targets), sidecar);
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string data;
  std::vector<std::string> targets;
  std::string arch = "64,32,16";
  std::size_t members = 10;
  std::uint64_t seed = 0;
  std::size_t epochs = 100;
  double lr = 1e-3;
  std::size_t batch = 32;
  double train_fraction = 0.75;
  double val_fraction = 0.1;
  bool mc_dropout = false;
  double rate = 0.1;
  std::size_t samples = 10;
  std::size_t threads = 0;
  std::string out;
};

int cmd_train(const TrainOptions& o) {
  const auto hidden = parse_arch(o.arch);
  if (!o.mc_dropout && o.members < 2) throw ConfigError("--members must be >= 2");
  if (o.mc_dropout && !(o.rate > 0.0 && o.rate < 1.0)) throw ConfigError("--rate must lie in (0, 1)");
  if (o.mc_dropout && o.samples < 2) throw ConfigError("--samples must be >= 2");
  TrainConfig base;
  base.epochs = o.epochs;
  base.learning_rate = o.lr;
  base.batch_size = o.batch;
  base.validation_fraction = o.val_fraction;
  base.dropout_rate = o.mc_dropout ? o.rate : 0.0;
  base.validate();
  const std::size_t threads = resolve_threads(o.threads);
  kernels::set_num_threads(threads);

  const Dataset ds = load_csv(o.data, o.targets);
  const SplitResult split = split_standardize(ds, o.train_fraction, o.seed);
  const fs::path out(o.out);
  prepare_dir(out);

  const std::size_t n_models = o.mc_dropout ? 1 : o.members;
  std::vector<std::optional<TrainResult>> results(n_models);
  std::vector<std::string> errors(n_models);
  std::vector<int> numeric(n_models, 0);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n_models); ++i) {
    const auto m = static_cast<std::size_t>(i);
    TrainConfig cfg = base;
    cfg.seed = derive_seed(o.seed, {m});
    try {
      results[m] = train(split.train.x, split.train.y, cfg, hidden);
    } catch (const NumericError& e) {
      errors[m] = e.what();
      numeric[m] = 1;
    } catch (const std::exception& e) {
      errors[m] = e.what();
    }
  }
  for (std::size_t m = 0; m < n_models; ++m) {
    if (errors[m].empty()) continue;
    const std::string msg = "member " + std::to_string(m) + ": " + errors[m];
    if (numeric[m]) throw NumericError(msg);
    throw ConfigError(msg);
  }

  json manifest{{"kind", o.mc_dropout ? "mc_dropout" : "deep_ensemble"},
                {"members", json::array()},
                {"plans", json::array()}};
  for (std::size_t m = 0; m < n_models; ++m) {
    const TrainResult& r = *results[m];
    const std::string name = o.mc_dropout ? "base.json" : "member_" + std::to_string(m) + ".json";
    const json meta{{"best_epoch", r.best_epoch},
                    {"best_validation_mse", r.best_validation_mse},
                    {"epochs", o.epochs},
                    {"learning_rate", o.lr},
                    {"batch_size", o.batch},
                    {"dropout_rate", base.dropout_rate}};
    write_json(out / name, mlp_to_json(r.model, derive_seed(o.seed, {m}), meta));
    manifest["members"].push_back({{"ref", name}});
    std::cout << (o.mc_dropout ? "base model" : "member " + std::to_string(m))
              << ": validation MSE " << format_double(r.best_validation_mse) << " (best epoch "
              << r.best_epoch << ")\n";
  }
  if (o.mc_dropout) {
    const auto plans = sample_dropout_plans(results.front()->model, o.rate, o.samples, derive_seed(o.seed, {0xd0u}));
    for (const auto& p : plans) manifest["plans"].push_back(plan_to_json(p));
  }
  write_json(out / "ensemble.json", manifest);
  write_json(out / "split.json", split_sidecar(split, o.seed, o.train_fraction));
  write_json(out / "config.json",
             {{"command", "train"},
              {"data", o.data},
              {"targets", o.targets},
              {"arch", hidden},
              {"members", o.mc_dropout ? 1 : o.members},
              {"seed", o.seed},
              {"epochs", o.epochs},
              {"learning_rate", o.lr},
              {"batch_size", o.batch},
              {"train_fraction", o.train_fraction},
              {"validation_fraction", o.val_fraction},
              {"mc_dropout", o.mc_dropout},
              {"dropout_rate", base.dropout_rate},
              {"samples", o.mc_dropout ? o.samples : 0},
              {"threads", threads}});
  return 0;
}

// ---------------------------------------------------------------- explain

struct LrpOptions {
  double gamma = 0.2;
  std::optional<double> gamma_dense;
  std::optional<double> gamma_conv;
  std::string rule = "generalized";

  LrpConfig resolve() const {
    LrpConfig c;
    c.gamma = gamma_dense.value_or(gamma);
    if (rule == "simple") {
      c.variant = LrpVariant::kSimple;
    } else if (rule == "generalized") {
      c.variant = LrpVariant::kGeneralized;
    } else {
      throw ConfigError("--rule must be 'simple' or 'generalized'");
    }
    c.validate();
    if (gamma_conv && *gamma_conv < 0.0) throw ConfigError("--gamma-conv must be >= 0");
    if (gamma_conv) warn("--gamma-conv has no effect: the model has dense layers only");
    return c;
  }

  json to_json(const LrpConfig& c) const {
    json j{{"gamma", c.gamma}, {"rule", rule}};
    j["gamma_conv"] = gamma_conv ? json(*gamma_conv) : json(nullptr);
    return j;
  }
};

struct ExplainOptions {
  std::string model;
  std::string data;
  std::optional<std::size_t> instance;
  std::string split = "test";
  std::string x;
  std::string method = "covlrp";
  std::string mode = "matrix";
  LrpOptions lrp;
  std::size_t ig_steps = kDefaultIgSteps;
  std::size_t svs_permutations = 0;
  std::uint64_t seed = 0;
  std::size_t output_index = 0;
  bool svg = false;
  std::size_t threads = 0;
  std::string out;
};

int cmd_explain(const ExplainOptions& o) {
  const LrpConfig lrp_config = o.lrp.resolve();
  const std::vector<std::string> cov_methods{"covlrp", "covgi", "covig", "covsvs"};
  const std::vector<std::string> head_methods{"lrp", "gi", "ig", "sa", "svs"};
  const bool is_cov = std::ranges::find(cov_methods, o.method) != cov_methods.end();
  if (!is_cov && std::ranges::find(head_methods, o.method) == head_methods.end())
    throw ConfigError("unknown --method '" + o.method + "'");
  if (o.mode != "matrix" && o.mode != "diag" && o.mode != "marg")
    throw ConfigError("--mode must be matrix, diag or marg");
  if (o.instance.has_value() == !o.x.empty()) throw ConfigError("give exactly one of --instance or --x");
  const std::size_t threads = resolve_threads(o.threads);
  kernels::set_num_threads(threads);

  const EnsembleModel model = load_ensemble(o.model);
  if (o.output_index >= model.output_dim()) throw ConfigError("--output-index out of range");

  Vector x;
  std::vector<std::string> labels;
  json input_ref;
  if (o.instance) {
    if (o.data.empty()) throw ConfigError("--instance needs --data");
    if (o.split != "train" && o.split != "test") throw ConfigError("--split must be train or test");
    const SplitResult split = load_split(o.model, o.data);
    const Dataset& part = o.split == "train" ? split.train : split.test;
    if (*o.instance >= part.size())
      throw ConfigError("--instance " + std::to_string(*o.instance) + " out of range (" + o.split + " split has " +
                        std::to_string(part.size()) + " rows)");
    const auto row = part.x.row(*o.instance);
    x.assign(row.begin(), row.end());
    labels = part.feature_names;
    input_ref = {{"split", o.split}, {"instance", *o.instance}};
  } else {
    x = parse_vector(o.x);
    input_ref = {{"x", x}};
  }
  if (x.size() != model.input_dim())
    throw ConfigError("input has " + std::to_string(x.size()) + " features, model expects " +
                      std::to_string(model.input_dim()));
  if (labels.size() != x.size()) {
    labels.clear();
    for (std::size_t i = 0; i < x.size(); ++i) labels.push_back("x" + std::to_string(i));
  }

  json record;
  std::vector<std::pair<std::string, std::string>> figures;
  if (is_cov) {
    Backend backend;
    backend.kind = o.method == "covlrp"  ? BackendKind::kLrp
                   : o.method == "covgi" ? BackendKind::kGradientInput
                   : o.method == "covig" ? BackendKind::kIntegratedGradients
                                         : BackendKind::kShapleySampling;
    backend.lrp = lrp_config;
    backend.ig_steps = o.ig_steps;
    backend.svs_permutations = o.svs_permutations;
    backend.seed = o.seed;
    const SecondOrderExplanation r = explain_uncertainty(model, x, backend, o.output_index);
    const std::string name = method_name(r.method);
    if (o.mode == "matrix") {
      record = second_order_to_json(r);
      figures.emplace_back("heatmap.svg", svg::matrix_heatmap(r.r, labels, name + " uncertainty matrix"));
    } else {
      const auto mode = o.mode == "diag" ? SummaryMode::kDiag : SummaryMode::kMarg;
      const SummarizedExplanation s = summarize(r, mode);
      record = {{"method", name}, {"mode", o.mode}, {"scores", s.scores}, {"s2", r.s2}};
      figures.emplace_back("bars.svg", svg::bar_chart(s.scores, labels, name + "-" + o.mode));
    }
    if (backend.kind == BackendKind::kLrp) record["gamma"] = lrp_config.gamma;
  } else {
    Explanation e;
    const Vector origin(x.size(), 0.0);
    if (o.method == "lrp") {
      e = variance_head_explanation(model, x, HeadBackend::kLrp, lrp_config, o.output_index);
    } else if (o.method == "gi") {
      e = variance_head_explanation(model, x, HeadBackend::kGradientInput, lrp_config, o.output_index);
    } else if (o.method == "ig") {
      e = integrated_gradients(variance_function(model, o.output_index), x, origin, o.ig_steps);
    } else if (o.method == "sa") {
      e = sensitivity(variance_function(model, o.output_index), x);
    } else {
      const std::size_t perms = o.svs_permutations == 0 ? default_svs_permutations(x.size()) : o.svs_permutations;
      e = shapley_value_sampling(variance_function(model, o.output_index), x, origin, perms, o.seed);
    }
    record = explanation_to_json(e, input_ref);
    figures.emplace_back("bars.svg", svg::bar_chart(e.scores, labels, method_name(e.method)));
  }
  record["input_ref"] = input_ref;

  const json config{{"command", "explain"},
                    {"model", o.model},
                    {"data", o.data},
                    {"input", input_ref},
                    {"method", o.method},
                    {"mode", o.mode},
                    {"lrp", o.lrp.to_json(lrp_config)},
                    {"ig_steps", o.ig_steps},
                    {"svs_permutations", o.svs_permutations},
                    {"seed", o.seed},
                    {"output_index", o.output_index},
                    {"ensemble", ensemble_summary(model)},
                    {"threads", threads}};
  if (o.out.empty()) {
    if (o.svg) throw ConfigError("--svg needs --out");
    std::cout << record.dump(2) << "\n";
    return 0;
  }
  const fs::path out(o.out);
  prepare_dir(out);
  write_json(out / "explanation.json", record);
  write_json(out / "config.json", config);
  if (o.svg)
    for (const auto& [name, text] : figures) write_text(out / name, text);
  return 0;
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkOptions {
  std::string model;
  std::string data;
  std::string dataset;
  std::string methods = "covlrp-diag,covlrp-marg,covgi-diag,covgi-marg,lrp,gi,ig,sa,svs";
  std::size_t top_k = 20;
  std::size_t draws = 5;
  std::uint64_t seed = 0;
  LrpOptions lrp;
  std::size_t ig_steps = kDefaultIgSteps;
  std::size_t svs_permutations = 0;
  std::size_t output_index = 0;
  std::size_t threads = 0;
  std::string out;
};

int cmd_benchmark(const BenchmarkOptions& o) {
  BenchmarkConfig config;
  config.methods.clear();
  for (const auto& name : split_commas(o.methods)) config.methods.push_back(parse_bench_method(name));
  if (config.methods.empty()) throw ConfigError("--methods is empty");
  config.top_k = o.top_k;
  config.draws = o.draws;
  config.seed = o.seed;
  config.lrp = o.lrp.resolve();
  config.ig_steps = o.ig_steps;
  config.svs_permutations = o.svs_permutations;
  config.output_index = o.output_index;
  if (o.top_k < 1) throw ConfigError("--top-k must be >= 1");
  if (o.draws < 1) throw ConfigError("--draws must be >= 1");
  const std::size_t threads = resolve_threads(o.threads);
  kernels::set_num_threads(threads);

  const EnsembleModel model = load_ensemble(o.model);
  const SplitResult split = load_split(o.model, o.data);
  if (o.top_k > split.test.size())
    throw ConfigError("--top-k " + std::to_string(o.top_k) + " exceeds the " + std::to_string(split.test.size()) +
                      " test rows");
  const KdeInpainter inp = fit_inpainter(split.train.x, default_bandwidth_grid());
  const std::string dataset = o.dataset.empty() ? fs::path(o.data).stem().string() : o.dataset;
  const auto reports = benchmark(model, split.test.x, inp, config);

  const fs::path out(o.out);
  prepare_dir(out);
  write_text(out / "results.csv", results_csv(reports, dataset));
  write_text(out / "summary.csv", summary_csv(reports, dataset));
  std::vector<std::pair<std::string, Vector>> series;
  for (const auto& r : reports) series.emplace_back(bench_method_name(r.method), r.mean_curve);
  write_text(out / "curves.svg", svg::curves(series, dataset + ": mean flipping curves"));
  std::vector<std::string> names;
  for (BenchMethod m : config.methods) names.push_back(bench_method_name(m));
  write_json(out / "config.json", {{"command", "benchmark"},
                                   {"model", o.model},
                                   {"data", o.data},
                                   {"dataset", dataset},
                                   {"methods", names},
                                   {"top_k", o.top_k},
                                   {"draws", o.draws},
                                   {"seed", o.seed},
                                   {"lrp", o.lrp.to_json(config.lrp)},
                                   {"ig_steps", o.ig_steps},
                                   {"svs_permutations", o.svs_permutations},
                                   {"output_index", o.output_index},
                                   {"kde_bandwidth", inp.bandwidth()},
                                   {"ensemble", ensemble_summary(model)},
                                   {"threads", threads}});

  std::cout << "method,mean_aufc,std_aufc,instances\n";
  for (const auto& r : reports)
    std::cout << bench_method_name(r.method) << ',' << format_double(r.mean) << ',' << format_double(r.std) << ','
              << r.instances.size() << '\n';
  return 0;
}

// ---------------------------------------------------------------- synth

int cmd_synth_regression(std::size_t n, std::uint64_t seed, const std::string& out) {
  if (n < 10) throw ConfigError("--n must be >= 10");
  const fs::path path(out);
  if (path.has_parent_path()) prepare_dir(path.parent_path());
  write_csv(synth_regression(n, seed), path);
  fs::path config = path;
  config.replace_extension(".config.json");
  write_json(config, {{"command", "synth regression"}, {"n", n}, {"seed", seed}, {"out", out}});
  return 0;
}

int cmd_synth_linear(std::size_t d, std::size_t members, std::uint64_t seed, const std::string& out) {
  const LinearEnsembleFixture fx = synth_linear_ensemble(d, members, seed);
  const fs::path dir(out);
  prepare_dir(dir);
  write_json(dir / "ensemble.json", ensemble_to_json(fx.model));
  const auto cov = fx.weight_covariance.values();
  write_json(dir / "weight_covariance.json", {{"d", d}, {"matrix", Vector(cov.begin(), cov.end())}});
  write_json(dir / "config.json",
             {{"command", "synth linear"}, {"d", d}, {"members", members}, {"seed", seed}, {"out", out}});
  return 0;
}

void add_lrp_flags(CLI::App* cmd, LrpOptions& o) {
  cmd->add_option("--gamma", o.gamma, "LRP-gamma for every layer")->capture_default_str();
  cmd->add_option("--gamma-dense", o.gamma_dense, "LRP-gamma for dense layers (overrides --gamma)");
  cmd->add_option("--gamma-conv", o.gamma_conv, "LRP-gamma for convolutional layers");
  cmd->add_option("--rule", o.rule, "LRP rule: generalized or simple")->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"covxplain: explain the predictive variance of neural-network ensembles"};
  app.require_subcommand(1);

  TrainOptions train_o;
  auto* train_cmd = app.add_subcommand("train", "Train a deep ensemble or an MC-dropout model");
  train_cmd->add_option("--data", train_o.data, "CSV file with a header row")->required();
  train_cmd->add_option("--target", train_o.targets, "Target column (repeatable)")->required();
  train_cmd->add_option("--arch", train_o.arch, "Hidden layer widths")->capture_default_str();
  train_cmd->add_option("--members", train_o.members, "Ensemble size")->capture_default_str();
  train_cmd->add_option("--seed", train_o.seed)->capture_default_str();
  train_cmd->add_option("--epochs", train_o.epochs)->capture_default_str();
  train_cmd->add_option("--lr", train_o.lr)->capture_default_str();
  train_cmd->add_option("--batch", train_o.batch)->capture_default_str();
  train_cmd->add_option("--train-fraction", train_o.train_fraction)->capture_default_str();
  train_cmd->add_option("--val-fraction", train_o.val_fraction)->capture_default_str();
  train_cmd->add_flag("--mc-dropout", train_o.mc_dropout, "Train one model with dropout and sample masks");
  train_cmd->add_option("--rate", train_o.rate, "Dropout rate")->capture_default_str();
  train_cmd->add_option("--samples", train_o.samples, "Number of dropout masks")->capture_default_str();
  train_cmd->add_option("--threads", train_o.threads, "Worker threads (default: COVXPLAIN_THREADS or all)");
  train_cmd->add_option("--out", train_o.out, "Output directory")->required();

  ExplainOptions explain_o;
  auto* explain_cmd = app.add_subcommand("explain", "Explain the ensemble variance at one input");
  explain_cmd->add_option("--model", explain_o.model, "ensemble.json or its directory")->required();
  explain_cmd->add_option("--data", explain_o.data, "CSV the model was trained on");
  explain_cmd->add_option("--instance", explain_o.instance, "Row index within --split");
  explain_cmd->add_option("--split", explain_o.split, "train or test")->capture_default_str();
  explain_cmd->add_option("--x", explain_o.x, "Comma-separated input in model (standardized) space");
  explain_cmd->add_option("--method", explain_o.method, "covlrp|covgi|covig|covsvs|lrp|gi|ig|sa|svs")
      ->capture_default_str();
  explain_cmd->add_option("--mode", explain_o.mode, "matrix|diag|marg (Cov methods)")->capture_default_str();
  add_lrp_flags(explain_cmd, explain_o.lrp);
  explain_cmd->add_option("--ig-steps", explain_o.ig_steps)->capture_default_str();
  explain_cmd->add_option("--svs-permutations", explain_o.svs_permutations, "0 selects max(128, 16 d)");
  explain_cmd->add_option("--seed", explain_o.seed)->capture_default_str();
  explain_cmd->add_option("--output-index", explain_o.output_index)->capture_default_str();
  explain_cmd->add_flag("--svg", explain_o.svg, "Also write SVG figures");
  explain_cmd->add_option("--threads", explain_o.threads);
  explain_cmd->add_option("--out", explain_o.out, "Output directory (stdout if omitted)");

  BenchmarkOptions bench_o;
  auto* bench_cmd = app.add_subcommand("benchmark", "Feature-flipping benchmark (AUFC, lower is better)");
  bench_cmd->add_option("--model", bench_o.model, "ensemble.json or its directory")->required();
  bench_cmd->add_option("--data", bench_o.data, "CSV the model was trained on")->required();
  bench_cmd->add_option("--dataset", bench_o.dataset, "Dataset label for the CSV (default: file stem)");
  bench_cmd->add_option("--methods", bench_o.methods)->capture_default_str();
  bench_cmd->add_option("--top-k", bench_o.top_k)->capture_default_str();
  bench_cmd->add_option("--draws", bench_o.draws)->capture_default_str();
  bench_cmd->add_option("--seed", bench_o.seed)->capture_default_str();
  add_lrp_flags(bench_cmd, bench_o.lrp);
  bench_cmd->add_option("--ig-steps", bench_o.ig_steps)->capture_default_str();
  bench_cmd->add_option("--svs-permutations", bench_o.svs_permutations, "0 selects max(128, 16 d)");
  bench_cmd->add_option("--output-index", bench_o.output_index)->capture_default_str();
  bench_cmd->add_option("--threads", bench_o.threads);
  bench_cmd->add_option("--out", bench_o.out, "Output directory")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic data and fixtures");
  synth_cmd->require_subcommand(1);
  std::size_t synth_n = 2000, synth_d = 4, synth_members = 3;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* reg_cmd = synth_cmd->add_subcommand("regression", "Tabular regression CSV with target column y");
  reg_cmd->add_option("--n", synth_n)->capture_default_str();
  reg_cmd->add_option("--seed", synth_seed)->capture_default_str();
  reg_cmd->add_option("--out", synth_out, "CSV path")->required();
  auto* lin_cmd = synth_cmd->add_subcommand("linear", "Linear ensemble with its weight covariance");
  lin_cmd->add_option("--d", synth_d)->capture_default_str();
  lin_cmd->add_option("--members", synth_members)->capture_default_str();
  lin_cmd->add_option("--seed", synth_seed)->capture_default_str();
  lin_cmd->add_option("--out", synth_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_o);
    if (*explain_cmd) return cmd_explain(explain_o);
    if (*bench_cmd) return cmd_benchmark(bench_o);
    if (*reg_cmd) return cmd_synth_regression(synth_n, synth_seed, synth_out);
    if (*lin_cmd) return cmd_synth_linear(synth_d, synth_members, synth_seed, synth_out);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace
}  // namespace covx::cli

int main(int argc, char** argv) { return covx::cli::run(argc, argv); }
