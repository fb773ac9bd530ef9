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

#include "covx/error.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace covx {
namespace {

std::atomic<std::size_t> g_warnings{0};
std::atomic<bool> g_quiet{false};
std::mutex g_stderr_mutex;

}  // namespace

void warn(std::string_view message) {
  ++g_warnings;
  if (g_quiet.load()) return;
  std::lock_guard<std::mutex> lock(g_stderr_mutex);
  std::cerr << "warning: " << message << '\n';
}

void set_warnings_quiet(bool quiet) { g_quiet = quiet; }

std::size_t warning_count() { return g_warnings.load(); }

}  // namespace covx
