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

#include "midx/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace midx {

namespace {

double sqdist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// k-means++: first centroid uniform, then D^2-weighted picks.
Matrix seed_centroids(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix c(k, points.cols());
  std::size_t first = rng.uniform_below(n);
  std::copy_n(points.row(first).data(), points.cols(), c.row(0).data());

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sqdist(points.row(i), c.row(0));
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick;
    if (total <= 0.0) {
      pick = rng.uniform_below(n);  // all mass on existing centroids
    } else {
      double r = rng.uniform01() * total;
      pick = n - 1;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (r < cum) {
          pick = i;
          break;
        }
      }
    }
    std::copy_n(points.row(pick).data(), points.cols(), c.row(j).data());
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], sqdist(points.row(i), c.row(j)));
  }
  return c;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::size_t iters,
                    Rng& rng) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (n == 0 || k == 0 || iters == 0)
    throw value_error("kmeans: n, k, iters must be positive");

  KMeansResult res;
  if (k > n) {
    k = n;
    res.k_reduced = true;
  }
  res.centroids = seed_centroids(points, k, rng);
  res.assign.assign(n, 0);

  std::vector<double> best(n);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < iters; ++it) {
    // Assignment pass; ties go to the lowest centroid index.
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double dj = sqdist(points.row(i), res.centroids.row(j));
        if (dj < bd) {
          bd = dj;
          arg = static_cast<std::uint32_t>(j);
        }
      }
      best[i] = bd;
      if (res.assign[i] != arg) changed = true;
      res.assign[i] = arg;
    }

    // Re-seed each empty cluster from the farthest point.
    std::fill(counts.begin(), counts.end(), 0);
    for (std::uint32_t a : res.assign) ++counts[a];
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (best[i] > best[far]) far = i;
      --counts[res.assign[far]];
      res.assign[far] = static_cast<std::uint32_t>(j);
      best[far] = 0.0;
      ++counts[j];
      changed = true;
    }

    double wcss = 0.0;
    for (double b : best) wcss += b;
    res.wcss_trace.push_back(wcss);
    if (!changed && it > 0) break;

    // Update pass: centroid = mean of its members. A cluster left empty by
    // the reseed pass (possible when many points coincide) keeps its old
    // position instead of dividing by zero.
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      auto row = res.centroids.row(j);
      std::fill(row.begin(), row.end(), 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto row = res.centroids.row(res.assign[i]);
      auto p = points.row(i);
      for (std::size_t c = 0; c < d; ++c) row[c] += p[c];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;
      auto row = res.centroids.row(j);
      for (std::size_t c = 0; c < d; ++c)
        row[c] /= static_cast<double>(counts[j]);
    }
  }

  // Final assignment against the last centroid update.
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t arg = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const double dj = sqdist(points.row(i), res.centroids.row(j));
      if (dj < bd) {
        bd = dj;
        arg = static_cast<std::uint32_t>(j);
      }
    }
    res.assign[i] = arg;
  }
  return res;
}

}  // namespace midx
