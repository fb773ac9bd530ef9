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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covx/ensemble.hpp"
#include "covx/first_order.hpp"
#include "covx/matrix.hpp"
#include "covx/second_order.hpp"

namespace covx {

// Isotropic Gaussian KDE over (standardized) training rows.
class KdeInpainter {
 public:
  KdeInpainter(Matrix training, double bandwidth);

  const Matrix& training() const { return training_; }
  double bandwidth() const { return bandwidth_; }
  std::size_t dim() const { return training_.cols(); }

  // Log-weights of each training row given the kept coordinates of x.
  Vector component_log_weights(std::span<const double> x, std::span<const std::size_t> removed) const;

 private:
  Matrix training_;
  double bandwidth_;
};

// 15 log-spaced values in [0.05, 2].
std::vector<double> default_bandwidth_grid();

// Mean log-likelihood of `held_out` rows under a Gaussian KDE on `fit` rows.
double kde_log_likelihood(const Matrix& fit, const Matrix& held_out, double bandwidth);

// Picks the grid value maximizing held-out log-likelihood. Duplicate rows are
// collapsed first; every fifth distinct row forms the held-out slice.
KdeInpainter fit_inpainter(const Matrix& train, std::span<const double> bandwidth_grid);

// Replaces the removed coordinates of x with a draw from the KDE conditioned on
// the kept ones. Kept coordinates are returned unchanged.
Vector conditional_resample(const KdeInpainter& inp, std::span<const double> x,
                            std::span<const std::size_t> removed, std::uint64_t seed);

// values[k] = mean s^2 after resampling the top-k features, divided by s^2(x).
struct FlippingCurve {
  Vector values;
  Vector fractions;
  std::size_t draws = 0;
};

// Features in flipping order: descending score, ties by ascending index.
std::vector<std::size_t> flip_order(std::span<const double> scores);

// Returns nullopt when s^2(x) < 1e-12 (nothing to explain).
std::optional<FlippingCurve> feature_flip(const std::function<double(std::span<const double>)>& s2_fn,
                                          std::span<const double> scores, std::span<const double> x,
                                          const KdeInpainter& inp, std::size_t draws,
                                          std::uint64_t seed);

// Trapezoid area over the fraction-flipped axis.
double aufc(const FlippingCurve& curve);

// Benchmark method ids, matching the table columns.
enum class BenchMethod {
  kCovLrpDiag,
  kCovLrpMarg,
  kCovGiDiag,
  kCovGiMarg,
  kLrp,
  kGi,
  kIg,
  kSa,
  kSvs,
};

std::string bench_method_name(BenchMethod m);
BenchMethod parse_bench_method(const std::string& name);
std::vector<BenchMethod> all_bench_methods();

struct BenchmarkConfig {
  std::vector<BenchMethod> methods = all_bench_methods();
  std::size_t top_k = 20;
  std::size_t draws = 5;
  std::uint64_t seed = 0;
  LrpConfig lrp;
  std::size_t ig_steps = kDefaultIgSteps;
  std::size_t svs_permutations = 0;  // 0 = default
  std::size_t output_index = 0;
};

// Ranking scores used by the flipping evaluation for one method.
Vector bench_scores(const EnsembleModel& model, std::span<const double> x, BenchMethod method,
                    const BenchmarkConfig& config, std::uint64_t seed);

struct InstanceResult {
  std::size_t instance_id = 0;  // row in the test matrix
  double s2_initial = 0.0;
  double aufc = 0.0;
  FlippingCurve curve;
};

struct AufcReport {
  BenchMethod method = BenchMethod::kCovLrpDiag;
  std::vector<InstanceResult> instances;
  double mean = 0.0;
  double std = 0.0;
  Vector mean_curve;
};

// Runs feature flipping for the top_k highest-s^2 test rows and every method.
// The flipping draws for an instance depend on (seed, instance), not on the
// method, so methods are compared under common random numbers.
std::vector<AufcReport> benchmark(const EnsembleModel& model, const Matrix& test,
                                  const KdeInpainter& inp, const BenchmarkConfig& config);

// Test row indices sorted by descending s^2 (ties by index), truncated to k.
std::vector<std::size_t> top_uncertainty_rows(const EnsembleModel& model, const Matrix& test,
                                              std::size_t k, std::size_t output_index = 0);

// CSV: dataset,method,instance_id,s2_initial,aufc.
std::string results_csv(const std::vector<AufcReport>& reports, const std::string& dataset);
// CSV: dataset,method,mean_aufc,std_aufc,instances.
std::string summary_csv(const std::vector<AufcReport>& reports, const std::string& dataset);

}  // namespace covx
