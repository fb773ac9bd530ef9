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
#include <stdexcept>
#include <string>
#include <string_view>

namespace covx {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or lengths that do not chain.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, diverged training, degenerate numerics.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid parameters or inputs supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Warnings go to stderr unless silenced; the counter is process-wide.
void warn(std::string_view message);
void set_warnings_quiet(bool quiet);
std::size_t warning_count();

}  // namespace covx
