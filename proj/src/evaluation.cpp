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

#include "covx/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "covx/error.hpp"
#include "covx/format.hpp"
#include "covx/random.hpp"

namespace covx {

KdeInpainter::KdeInpainter(Matrix training, double bandwidth)
    : training_(std::move(training)), bandwidth_(bandwidth) {
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_))
    throw ConfigError("KDE bandwidth must be positive");
  if (training_.rows() < 2) throw ConfigError("KDE inpainter needs at least two training rows");
}

namespace {

std::vector<bool> removed_mask(std::size_t d, std::span<const std::size_t> removed) {
  std::vector<bool> mask(d, false);
  for (std::size_t i : removed) {
    if (i >= d) throw DimensionError("removed feature index " + std::to_string(i) + " out of range");
    mask[i] = true;
  }
  return mask;
}

double log_sum_exp(std::span<const double> v) {
  const double hi = *std::ranges::max_element(v);
  if (!std::isfinite(hi)) return hi;
  Vector shifted(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) shifted[i] = std::exp(v[i] - hi);
  return hi + std::log(pairwise_sum(shifted));
}

}  // namespace

Vector KdeInpainter::component_log_weights(std::span<const double> x,
                                           std::span<const std::size_t> removed) const {
  if (x.size() != dim()) throw DimensionError("inpainter: input length does not match training data");
  const std::vector<bool> mask = removed_mask(dim(), removed);
  const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  Vector logw(training_.rows());
  for (std::size_t n = 0; n < training_.rows(); ++n) {
    const auto t = training_.row(n);
    double dist = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      if (mask[i]) continue;
      const double diff = x[i] - t[i];
      dist += diff * diff;
    }
    logw[n] = -dist * inv;
  }
  return logw;
}

std::vector<double> default_bandwidth_grid() {
  constexpr std::size_t kCount = 15;
  const double lo = std::log(0.05);
  const double hi = std::log(2.0);
  std::vector<double> grid(kCount);
  for (std::size_t i = 0; i < kCount; ++i)
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kCount - 1));
  return grid;
}

double kde_log_likelihood(const Matrix& fit, const Matrix& held_out, double bandwidth) {
  if (fit.cols() != held_out.cols()) throw DimensionError("kde_log_likelihood: column mismatch");
  const double d = static_cast<double>(fit.cols());
  const double log_norm = -std::log(static_cast<double>(fit.rows())) -
                          0.5 * d * std::log(2.0 * std::numbers::pi * bandwidth * bandwidth);
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  Vector logk(fit.rows());
  Vector per_point(held_out.rows());
  for (std::size_t q = 0; q < held_out.rows(); ++q) {
    const auto x = held_out.row(q);
    for (std::size_t n = 0; n < fit.rows(); ++n) {
      const auto t = fit.row(n);
      double dist = 0.0;
      for (std::size_t i = 0; i < fit.cols(); ++i) dist += (x[i] - t[i]) * (x[i] - t[i]);
      logk[n] = -dist * inv;
    }
    per_point[q] = log_sum_exp(logk) + log_norm;
  }
  return pairwise_sum(per_point) / static_cast<double>(held_out.rows());
}

KdeInpainter fit_inpainter(const Matrix& train, std::span<const double> bandwidth_grid) {
  if (train.rows() < 10) throw ConfigError("fit_inpainter: at least 10 training rows are required");
  if (bandwidth_grid.empty()) throw ConfigError("fit_inpainter: empty bandwidth grid");
  for (double h : bandwidth_grid)
    if (!(h > 0.0)) throw ConfigError("fit_inpainter: bandwidths must be positive");

  Matrix data = train;
  Rng jitter_rng(derive_seed(0, {0x71c}));
  std::normal_distribution<double> jitter(0.0, 1e-6);
  for (std::size_t c = 0; c < data.cols(); ++c) {
    bool constant = true;
    for (std::size_t r = 1; r < data.rows() && constant; ++r) constant = data(r, c) == data(0, c);
    if (!constant) continue;
    warn("fit_inpainter: column " + std::to_string(c) + " has zero variance; adding 1e-6 jitter");
    for (std::size_t r = 0; r < data.rows(); ++r) data(r, c) += jitter(jitter_rng);
  }
  if (bandwidth_grid.size() == 1) return KdeInpainter(std::move(data), bandwidth_grid.front());

  // Distinct rows in first-occurrence order.
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&data](std::size_t a, std::size_t b) {
    return std::ranges::lexicographical_compare(data.row(a), data.row(b));
  };
  std::ranges::stable_sort(order, row_less);
  std::vector<std::size_t> distinct;
  for (std::size_t i = 0; i < order.size(); ++i)
    if (i == 0 || row_less(order[i - 1], order[i])) distinct.push_back(order[i]);
  std::ranges::sort(distinct);
  if (distinct.size() < 10) throw ConfigError("fit_inpainter: fewer than 10 distinct rows");

  std::vector<std::size_t> fit_rows, held_rows;
  for (std::size_t i = 0; i < distinct.size(); ++i)
    (i % 5 == 4 ? held_rows : fit_rows).push_back(distinct[i]);
  auto gather = [&data](const std::vector<std::size_t>& rows) {
    Matrix m(rows.size(), data.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) std::ranges::copy(data.row(rows[i]), m.row(i).begin());
    return m;
  };
  const Matrix fit = gather(fit_rows);
  const Matrix held = gather(held_rows);

  double best_h = bandwidth_grid.front();
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double h : bandwidth_grid) {
    const double ll = kde_log_likelihood(fit, held, h);
    if (ll > best_ll) {
      best_ll = ll;
      best_h = h;
    }
  }
  return KdeInpainter(std::move(data), best_h);
}

namespace {

// Component probabilities from log-weights; uniform if they degenerate.
Vector normalized_weights(const Vector& logw) {
  Vector w(logw.size());
  const double hi = *std::ranges::max_element(logw);
  bool ok = std::isfinite(hi);
  if (ok) {
    for (std::size_t n = 0; n < w.size(); ++n) w[n] = std::exp(logw[n] - hi);
    ok = pairwise_sum(w) > 0.0;
  }
  if (!ok) {
    warn("conditional_resample: kernel weights underflow; using uniform component weights");
    std::ranges::fill(w, 1.0);
  }
  return w;
}

class ConditionalSampler {
 public:
  ConditionalSampler(const KdeInpainter& inp, std::span<const double> x,
                     std::span<const std::size_t> removed)
      : inp_(inp), x_(x.begin(), x.end()), removed_(removed.begin(), removed.end()) {
    if (removed_.empty()) throw ConfigError("conditional_resample: removed set is empty");
    const Vector w = normalized_weights(inp.component_log_weights(x, removed));
    pick_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }

  Vector draw(Rng& rng) {
    Vector out = x_;
    const std::size_t n = pick_(rng);
    const auto t = inp_.training().row(n);
    for (std::size_t i : removed_) out[i] = t[i] + inp_.bandwidth() * noise_(rng);
    return out;
  }

 private:
  const KdeInpainter& inp_;
  Vector x_;
  std::vector<std::size_t> removed_;
  std::discrete_distribution<std::size_t> pick_;
  std::normal_distribution<double> noise_{0.0, 1.0};
};

}  // namespace

Vector conditional_resample(const KdeInpainter& inp, std::span<const double> x,
                            std::span<const std::size_t> removed, std::uint64_t seed) {
  ConditionalSampler sampler(inp, x, removed);
  Rng rng(seed);
  return sampler.draw(rng);
}

std::vector<std::size_t> flip_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::optional<FlippingCurve> feature_flip(const std::function<double(std::span<const double>)>& s2_fn,
                                          std::span<const double> scores, std::span<const double> x,
                                          const KdeInpainter& inp, std::size_t draws,
                                          std::uint64_t seed) {
  if (draws < 1) throw ConfigError("feature_flip: draws must be >= 1");
  if (scores.size() != x.size()) throw DimensionError("feature_flip: ranking length != input length");
  const std::size_t d = x.size();
  const double s2_x = s2_fn(x);
  if (!(s2_x >= 1e-12)) return std::nullopt;

  const std::vector<std::size_t> order = flip_order(scores);
  FlippingCurve curve;
  curve.draws = draws;
  curve.values.assign(d + 1, 1.0);
  curve.fractions.resize(d + 1);
  for (std::size_t k = 0; k <= d; ++k)
    curve.fractions[k] = static_cast<double>(k) / static_cast<double>(d);

  for (std::size_t k = 1; k <= d; ++k) {
    const std::span<const std::size_t> removed(order.data(), k);
    ConditionalSampler sampler(inp, x, removed);
    Rng rng(derive_seed(seed, {k}));
    Vector kept;
    for (std::size_t t = 0; t < draws; ++t) {
      const double v = s2_fn(sampler.draw(rng));
      if (std::isfinite(v)) {
        kept.push_back(v);
      } else {
        warn("feature_flip: non-finite s2 on a perturbed point; draw discarded");
      }
    }
    if (kept.empty()) throw NumericError("feature_flip: every draw at step " + std::to_string(k) + " was discarded");
    curve.values[k] = pairwise_sum(kept) / static_cast<double>(kept.size()) / s2_x;
  }
  return curve;
}

double aufc(const FlippingCurve& curve) {
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < curve.values.size(); ++k)
    area += 0.5 * (curve.values[k] + curve.values[k + 1]) * (curve.fractions[k + 1] - curve.fractions[k]);
  return area;
}

std::string bench_method_name(BenchMethod m) {
  switch (m) {
    case BenchMethod::kCovLrpDiag: return "covlrp-diag";
    case BenchMethod::kCovLrpMarg: return "covlrp-marg";
    case BenchMethod::kCovGiDiag: return "covgi-diag";
    case BenchMethod::kCovGiMarg: return "covgi-marg";
    case BenchMethod::kLrp: return "lrp";
    case BenchMethod::kGi: return "gi";
    case BenchMethod::kIg: return "ig";
    case BenchMethod::kSa: return "sa";
    case BenchMethod::kSvs: return "svs";
  }
  return "unknown";
}

std::vector<BenchMethod> all_bench_methods() {
  return {BenchMethod::kCovLrpDiag, BenchMethod::kCovLrpMarg, BenchMethod::kCovGiDiag,
          BenchMethod::kCovGiMarg,  BenchMethod::kLrp,        BenchMethod::kGi,
          BenchMethod::kIg,         BenchMethod::kSa,         BenchMethod::kSvs};
}

BenchMethod parse_bench_method(const std::string& name) {
  for (BenchMethod m : all_bench_methods())
    if (bench_method_name(m) == name) return m;
  throw ConfigError("unknown benchmark method '" + name + "'");
}

Vector bench_scores(const EnsembleModel& model, std::span<const double> x, BenchMethod method,
                    const BenchmarkConfig& config, std::uint64_t seed) {
  const std::size_t out = config.output_index;
  auto cov = [&](BackendKind kind, SummaryMode mode) {
    Backend backend;
    backend.kind = kind;
    backend.lrp = config.lrp;
    return summarize(explain_uncertainty(model, x, backend, out), mode).scores;
  };
  const Vector origin(x.size(), 0.0);
  switch (method) {
    case BenchMethod::kCovLrpDiag: return cov(BackendKind::kLrp, SummaryMode::kDiag);
    case BenchMethod::kCovLrpMarg: return cov(BackendKind::kLrp, SummaryMode::kMarg);
    case BenchMethod::kCovGiDiag: return cov(BackendKind::kGradientInput, SummaryMode::kDiag);
    case BenchMethod::kCovGiMarg: return cov(BackendKind::kGradientInput, SummaryMode::kMarg);
    case BenchMethod::kLrp:
      return variance_head_explanation(model, x, HeadBackend::kLrp, config.lrp, out).scores;
    case BenchMethod::kGi:
      return variance_head_explanation(model, x, HeadBackend::kGradientInput, config.lrp, out).scores;
    case BenchMethod::kIg:
      return integrated_gradients(variance_function(model, out), x, origin, config.ig_steps).scores;
    case BenchMethod::kSa: return sensitivity(variance_function(model, out), x).scores;
    case BenchMethod::kSvs: {
      const std::size_t perms = config.svs_permutations == 0 ? default_svs_permutations(x.size())
                                                             : config.svs_permutations;
      return shapley_value_sampling(variance_function(model, out), x, origin, perms, seed).scores;
    }
  }
  throw ConfigError("unhandled benchmark method");
}

std::vector<std::size_t> top_uncertainty_rows(const EnsembleModel& model, const Matrix& test,
                                              std::size_t k, std::size_t output_index) {
  if (k > test.rows()) throw ConfigError("top_k exceeds the number of test rows");
  Vector s2(test.rows());
  for (std::size_t r = 0; r < test.rows(); ++r) s2[r] = predict_all(model, test.row(r), output_index).s2;
  std::vector<std::size_t> order(test.rows());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&s2](std::size_t a, std::size_t b) { return s2[a] > s2[b]; });
  order.resize(k);
  return order;
}

std::vector<AufcReport> benchmark(const EnsembleModel& model, const Matrix& test,
                                  const KdeInpainter& inp, const BenchmarkConfig& config) {
  if (config.methods.empty()) throw ConfigError("benchmark: no methods selected");
  if (config.draws < 1) throw ConfigError("benchmark: draws must be >= 1");
  if (test.cols() != model.input_dim()) throw DimensionError("benchmark: test width != input_dim");
  const std::vector<std::size_t> rows = top_uncertainty_rows(model, test, config.top_k, config.output_index);
  const std::size_t n_methods = config.methods.size();
  const std::size_t n_tasks = rows.size() * n_methods;

  std::vector<std::optional<InstanceResult>> slots(n_tasks);
  std::vector<std::string> errors(n_tasks);
  auto s2_fn = [&model, &config](std::span<const double> p) {
    return predict_all(model, p, config.output_index).s2;
  };

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t task = 0; task < static_cast<std::ptrdiff_t>(n_tasks); ++task) {
    const auto t = static_cast<std::size_t>(task);
    const std::size_t inst = t / n_methods;
    const std::size_t mi = t % n_methods;
    const std::size_t row = rows[inst];
    try {
      const auto x = test.row(row);
      const Vector scores = bench_scores(model, x, config.methods[mi], config,
                                         derive_seed(config.seed, {row, static_cast<std::uint64_t>(config.methods[mi])}));
      auto curve = feature_flip(s2_fn, scores, x, inp, config.draws, derive_seed(config.seed, {row}));
      if (curve) slots[t] = InstanceResult{row, s2_fn(x), aufc(*curve), std::move(*curve)};
    } catch (const std::exception& e) {
      errors[t] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericError("benchmark: " + e);

  std::vector<AufcReport> reports;
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    AufcReport report;
    report.method = config.methods[mi];
    for (std::size_t inst = 0; inst < rows.size(); ++inst)
      if (slots[inst * n_methods + mi]) report.instances.push_back(*slots[inst * n_methods + mi]);
    if (!report.instances.empty()) {
      Vector a;
      for (const auto& r : report.instances) a.push_back(r.aufc);
      const double n = static_cast<double>(a.size());
      report.mean = pairwise_sum(a) / n;
      Vector sq;
      for (double v : a) sq.push_back((v - report.mean) * (v - report.mean));
      report.std = std::sqrt(pairwise_sum(sq) / n);
      const std::size_t len = report.instances.front().curve.values.size();
      report.mean_curve.assign(len, 0.0);
      for (const auto& r : report.instances)
        for (std::size_t k = 0; k < len; ++k) report.mean_curve[k] += r.curve.values[k] / n;
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

std::string results_csv(const std::vector<AufcReport>& reports, const std::string& dataset) {
  std::ostringstream out;
  out << "dataset,method,instance_id,s2_initial,aufc\n";
  for (const auto& report : reports)
    for (const auto& r : report.instances)
      out << dataset << ',' << bench_method_name(report.method) << ',' << r.instance_id << ','
          << format_double(r.s2_initial) << ',' << format_double(r.aufc) << '\n';
  return out.str();
}

std::string summary_csv(const std::vector<AufcReport>& reports, const std::string& dataset) {
  std::ostringstream out;
  out << "dataset,method,mean_aufc,std_aufc,instances\n";
  for (const auto& report : reports)
    out << dataset << ',' << bench_method_name(report.method) << ',' << format_double(report.mean)
        << ',' << format_double(report.std) << ',' << report.instances.size() << '\n';
  return out.str();
}

}  // namespace covx
