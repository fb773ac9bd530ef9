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

// Serial vs parallel kernel timings. Prints one CSV row per kernel and size.
// Usage: bench_kernels [repeats]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "covx/ensemble.hpp"
#include "covx/kernels.hpp"
#include "covx/nn.hpp"

namespace {

using covx::Matrix;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

// Best wall time over `repeats` calls, in milliseconds.
double best_ms(const std::function<Matrix()>& fn, int repeats, Matrix& result) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    result = fn();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    best = std::min(best, ms);
  }
  return best;
}

void report(const std::string& kernel, const std::string& size, const std::function<Matrix()>& serial,
            const std::function<Matrix()>& parallel, int repeats) {
  Matrix a, b;
  const double ts = best_ms(serial, repeats, a);
  const double tp = best_ms(parallel, repeats, b);
  std::printf("%s,%s,%zu,%.3f,%.3f,%.2f,%s\n", kernel.c_str(), size.c_str(), covx::kernels::max_threads(), ts, tp,
              ts / tp, a == b ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
  namespace k = covx::kernels;
  std::printf("kernel,size,threads,serial_ms,parallel_ms,speedup,identical\n");

  for (auto [m, d] : {std::pair<std::size_t, std::size_t>{10, 64}, {10, 256}, {50, 512}, {100, 1024}}) {
    const Matrix rows = random_matrix(m, d, d);
    const std::string size = "M=" + std::to_string(m) + " d=" + std::to_string(d);
    report("covariance", size, [&] { return k::serial::covariance(rows); },
           [&] { return k::parallel::covariance(rows); }, repeats);
  }
  for (auto [m, d] : {std::pair<std::size_t, std::size_t>{10, 64}, {20, 128}, {50, 128}}) {
    const Matrix rows = random_matrix(m, d, d + 1);
    const std::string size = "M=" + std::to_string(m) + " d=" + std::to_string(d);
    report("coefficient_double_sum", size, [&] { return k::serial::coefficient_double_sum(rows); },
           [&] { return k::parallel::coefficient_double_sum(rows); }, repeats);
  }
  const std::vector<std::size_t> hidden{64, 32, 16};
  const covx::Mlp net = covx::init_mlp(11, hidden, 1, 7);
  for (std::size_t n : {1000, 10000, 100000}) {
    const Matrix x = random_matrix(n, 11, n);
    report("predict_batch", "n=" + std::to_string(n), [&] { return k::serial::predict_batch(net, x); },
           [&] { return k::parallel::predict_batch(net, x); }, repeats);
  }
  return 0;
}
