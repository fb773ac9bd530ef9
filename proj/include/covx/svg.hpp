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

#include <string>
#include <utility>
#include <vector>

#include "covx/matrix.hpp"

namespace covx::svg {

// d x d grid, blue (negative) through white to red (positive), symmetric scale.
std::string matrix_heatmap(const Matrix& m, const std::vector<std::string>& labels,
                           const std::string& title);

// One bar per feature; negative bars extend below the axis.
std::string bar_chart(const Vector& values, const std::vector<std::string>& labels,
                      const std::string& title);

// Flipping curves on [0, 1] x [0, max].
std::string curves(const std::vector<std::pair<std::string, Vector>>& series, const std::string& title);

}  // namespace covx::svg
