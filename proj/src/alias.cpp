// Copyright 2026 The midx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "midx/alias.hpp"

#include <cmath>

namespace midx {

AliasTable::AliasTable(std::span<const double> weights) {
  const std::size_t k = weights.size();
  if (k == 0) throw value_error("alias: empty weight vector");
  total_ = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw value_error("alias: weights must be finite and nonnegative");
    total_ += w;
  }
  if (total_ <= 0.0) throw value_error("alias: all weights are zero");

  entries_.resize(k);
  // Scaled weights sum to k; entries strictly below 1 are "small".
  std::vector<double> scaled(k);
  std::vector<std::uint32_t> small, large;
  small.reserve(k);
  large.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    scaled[i] = weights[i] * static_cast<double>(k) / total_;
    if (scaled[i] < 1.0)
      small.push_back(static_cast<std::uint32_t>(i));
    else
      large.push_back(static_cast<std::uint32_t>(i));
  }

  while (!small.empty() && !large.empty()) {
    const std::uint32_t s = small.back();
    small.pop_back();
    const std::uint32_t l = large.back();
    // Donor drift can leave a paired column a few ulp below zero.
    entries_[s] = {scaled[s] < 0.0 ? 0.0 : scaled[s], l};
    // The donor keeps whatever mass the small column did not need.
    scaled[l] -= 1.0 - scaled[s];
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers hold a full column of their own mass up to rounding.
  for (std::uint32_t i : large) entries_[i] = {1.0, i};
  for (std::uint32_t i : small) entries_[i] = {1.0, i};
}

double AliasTable::outcome_prob(std::size_t i) const {
  const double k = static_cast<double>(entries_.size());
  double p = entries_[i].prob;
  for (std::size_t j = 0; j < entries_.size(); ++j)
    if (entries_[j].alias == i && j != i) p += 1.0 - entries_[j].prob;
  return p / k;
}

}  // namespace midx
