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

#ifndef MIDX_KMEANS_HPP
#define MIDX_KMEANS_HPP

#include <cstdint>
#include <vector>

#include "midx/core.hpp"
#include "midx/rng.hpp"

namespace midx {

struct KMeansResult {
  Matrix centroids;                    // k x d
  std::vector<std::uint32_t> assign;   // nearest centroid, ties to lowest index
  std::vector<double> wcss_trace;      // within-cluster sum of squares per pass
  bool k_reduced = false;              // k was clamped to the point count
};

// Lloyd iterations with k-means++ seeding. Empty clusters are re-seeded
// from the point currently farthest from its centroid. Stops early when
// assignments no longer change.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::size_t iters,
                    Rng& rng);

}  // namespace midx

#endif  // MIDX_KMEANS_HPP
