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

#ifndef MIDX_ALIAS_HPP
#define MIDX_ALIAS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "midx/core.hpp"
#include "midx/rng.hpp"

namespace midx {

// Vose alias table: O(K) build, O(1) draw. Immutable after construction;
// weights are rebuilt, never updated in place.
class AliasTable {
 public:
  // Weights must be finite, nonnegative, with at least one positive entry.
  // Zero-weight outcomes end up with draw probability exactly 0.
  explicit AliasTable(std::span<const double> weights);

  std::size_t size() const { return entries_.size(); }
  double total_weight() const { return total_; }

  // One uniform index draw plus one Bernoulli comparison.
  std::size_t draw(Rng& rng) const {
    const std::size_t i = rng.uniform_below(entries_.size());
    return rng.uniform01() < entries_[i].prob ? i : entries_[i].alias;
  }

  double prob(std::size_t i) const { return entries_[i].prob; }
  std::size_t alias(std::size_t i) const { return entries_[i].alias; }

  // Per-outcome draw probability reconstructed from the table; equals
  // weight_i / total_weight up to accumulated rounding.
  double outcome_prob(std::size_t i) const;

 private:
  // prob and alias interleaved: a draw touches one cache line.
  struct Entry {
    double prob;
    std::uint32_t alias;
  };
  std::vector<Entry> entries_;
  double total_ = 0.0;
};

}  // namespace midx

#endif  // MIDX_ALIAS_HPP
