// Copyright 2026 The IWR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace iwr {

/// log(sum(exp(x))) with the maximum factored out. Terms are accumulated in
/// index order. Returns -inf for an empty span.
inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(peak)) return peak;
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

/// log(mean(exp(x))).
inline double log_mean_exp(std::span<const double> x) {
  return log_sum_exp(x) - std::log(static_cast<double>(x.size()));
}

}  // namespace iwr
