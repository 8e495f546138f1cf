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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include "midx/core.hpp"
#include "midx/kmeans.hpp"
#include "midx/multi_index.hpp"
#include "midx/rng.hpp"

using namespace midx;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, double scale, Rng& rng) {
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = scale * rng.normal();
  return m;
}

// Reconstruction from codebook halves plus the stored residual must return
// the original row exactly (up to float association error).
Vec reconstruct(const MultiIndex& mi, std::size_t i) {
  const std::size_t d = mi.dim();
  Vec out(d, 0.0);
  if (mi.kind == QuantKind::product) {
    const std::size_t h = d / 2;
    auto c1 = mi.book1.row(mi.assign1[i]);
    auto c2 = mi.book2.row(mi.assign2[i]);
    for (std::size_t j = 0; j < h; ++j) out[j] = c1[j];
    for (std::size_t j = 0; j < h; ++j) out[h + j] = c2[j];
  } else {
    auto c1 = mi.book1.row(mi.assign1[i]);
    auto c2 = mi.book2.row(mi.assign2[i]);
    for (std::size_t j = 0; j < d; ++j) out[j] = c1[j] + c2[j];
  }
  auto r = mi.residuals.row(i);
  for (std::size_t j = 0; j < d; ++j) out[j] += r[j];
  return out;
}

}  // namespace

TEST_CASE("kmeans with k=1 returns the centroid of all points") {
  Matrix pts(4, 2);
  pts(0, 0) = 0.0;
  pts(0, 1) = 0.0;
  pts(1, 0) = 2.0;
  pts(1, 1) = 0.0;
  pts(2, 0) = 0.0;
  pts(2, 1) = 2.0;
  pts(3, 0) = 2.0;
  pts(3, 1) = 2.0;
  Rng rng(1);
  const KMeansResult r = kmeans(pts, 1, 5, rng);
  CHECK(r.centroids.rows() == 1);
  CHECK(r.centroids(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.centroids(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  for (auto a : r.assign) CHECK(a == 0);
}

TEST_CASE("kmeans separates two well-split pairs into their means") {
  Matrix pts(4, 1);
  pts(0, 0) = 0.0;
  pts(1, 0) = 0.5;
  pts(2, 0) = 10.0;
  pts(3, 0) = 10.5;
  Rng rng(2);
  const KMeansResult r = kmeans(pts, 2, 10, rng);
  std::vector<double> centers{r.centroids(0, 0), r.centroids(1, 0)};
  std::sort(centers.begin(), centers.end());
  CHECK(centers[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(centers[1] == doctest::Approx(10.25).epsilon(1e-12));
  CHECK(r.assign[0] == r.assign[1]);
  CHECK(r.assign[2] == r.assign[3]);
  CHECK(r.assign[0] != r.assign[2]);
}

TEST_CASE("kmeans objective is non-increasing across iterations") {
  Rng rng(3);
  const Matrix pts = random_matrix(200, 8, 1.0, rng);
  const KMeansResult r = kmeans(pts, 16, 12, rng);
  REQUIRE(r.wcss_trace.size() >= 2);
  for (std::size_t i = 1; i < r.wcss_trace.size(); ++i)
    CHECK(r.wcss_trace[i] <= r.wcss_trace[i - 1] + 1e-9);
}

TEST_CASE("kmeans clamps k to the point count and flags the reduction") {
  Matrix pts(3, 2);
  pts(0, 0) = 0.0;
  pts(0, 1) = 0.0;
  pts(1, 0) = 5.0;
  pts(1, 1) = 0.0;
  pts(2, 0) = 0.0;
  pts(2, 1) = 5.0;
  Rng rng(4);
  const KMeansResult r = kmeans(pts, 5, 5, rng);
  CHECK(r.k_reduced);
  CHECK(r.centroids.rows() == 3);
  const KMeansResult r2 = kmeans(pts, 2, 5, rng);
  CHECK_FALSE(r2.k_reduced);
}

TEST_CASE("kmeans tolerates duplicate points without producing NaN") {
  Matrix pts(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    pts(i, 0) = 1.0;
    pts(i, 1) = -2.0;
  }
  Rng rng(6);
  const KMeansResult r = kmeans(pts, 4, 8, rng);
  for (double v : r.centroids.data()) CHECK(std::isfinite(v));
  for (auto a : r.assign) CHECK(a < 4);
}

TEST_CASE("kmeans validates arguments") {
  Rng rng(5);
  Matrix pts(4, 2);
  CHECK_THROWS_AS((void)kmeans(pts, 0, 5, rng), value_error);
  CHECK_THROWS_AS((void)kmeans(pts, 2, 0, rng), value_error);
  Matrix empty(0, 0);
  CHECK_THROWS_AS((void)kmeans(empty, 1, 5, rng), value_error);
}

TEST_CASE("identical rows collapse to a single occupied cell") {
  Matrix emb(6, 4);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) emb(i, j) = 1.5;
  const MultiIndex mi = build_index(emb, 4, QuantKind::product, 5, 9);
  CHECK(mi.nonempty_cells() == 1);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(std::fabs(mi.residuals(i, j)) < 1e-12);
}

TEST_CASE("four corner points occupy four singleton cells") {
  // 2-d corners (+-1, +-1): each half-space has exactly two distinct values,
  // so K=2 per book quantizes every row exactly.
  Matrix emb(4, 2);
  emb(0, 0) = 1.0;
  emb(0, 1) = 1.0;
  emb(1, 0) = 1.0;
  emb(1, 1) = -1.0;
  emb(2, 0) = -1.0;
  emb(2, 1) = 1.0;
  emb(3, 0) = -1.0;
  emb(3, 1) = -1.0;
  const MultiIndex mi = build_index(emb, 2, QuantKind::product, 10, 10);
  CHECK(mi.nonempty_cells() == 4);
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (std::size_t i = 0; i < 4; ++i)
    seen.insert({mi.assign1[i], mi.assign2[i]});
  CHECK(seen.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::fabs(mi.residuals(i, 0)) < 1e-12);
    CHECK(std::fabs(mi.residuals(i, 1)) < 1e-12);
    CHECK(mi.cell(mi.assign1[i], mi.assign2[i]).size() == 1);
  }
  CHECK(distortion(mi) < 1e-20);
}

TEST_CASE("codebooks plus residuals reconstruct every row for both kinds") {
  Rng rng(11);
  const Matrix emb = random_matrix(64, 8, 1.0, rng);
  for (QuantKind kind : {QuantKind::product, QuantKind::residual}) {
    const MultiIndex mi = build_index(emb, 4, kind, 8, 12);
    for (std::size_t i = 0; i < emb.rows(); ++i) {
      const Vec rec = reconstruct(mi, i);
      for (std::size_t j = 0; j < emb.cols(); ++j)
        CHECK(std::fabs(rec[j] - emb(i, j)) < 1e-10);
    }
  }
}

TEST_CASE("cells partition the catalog exactly") {
  Rng rng(13);
  const Matrix emb = random_matrix(100, 6, 1.0, rng);
  const MultiIndex mi = build_index(emb, 5, QuantKind::residual, 6, 14);
  std::vector<int> hits(emb.rows(), 0);
  for (std::uint32_t a = 0; a < mi.k(); ++a) {
    for (std::uint32_t b = 0; b < mi.k(); ++b) {
      for (std::uint32_t i : mi.cell(a, b)) {
        REQUIRE(i < emb.rows());
        hits[i]++;
        CHECK(mi.assign1[i] == a);
        CHECK(mi.assign2[i] == b);
        CHECK(mi.cell_of(i) == a * mi.k() + b);
      }
    }
  }
  for (int h : hits) CHECK(h == 1);
}

TEST_CASE("distortion matches the brute-force sum of squared residuals") {
  Rng rng(15);
  const Matrix emb = random_matrix(80, 10, 1.0, rng);
  const MultiIndex mi = build_index(emb, 4, QuantKind::product, 8, 16);
  double acc = 0.0;
  for (std::size_t i = 0; i < emb.rows(); ++i)
    for (std::size_t j = 0; j < emb.cols(); ++j)
      acc += mi.residuals(i, j) * mi.residuals(i, j);
  CHECK(distortion(mi) == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("distortion equals the known squared norms of forced residuals") {
  // With K=1 both codewords are means, so the residuals are explicit:
  // centroid (1.5, 2), residuals (+-1.5, +-2), total 2 * (2.25 + 4).
  Matrix emb(2, 2);
  emb(0, 0) = 0.0;
  emb(0, 1) = 0.0;
  emb(1, 0) = 3.0;
  emb(1, 1) = 4.0;
  const MultiIndex mi = build_index(emb, 1, QuantKind::residual, 5, 17);
  CHECK(distortion(mi) == doctest::Approx(12.5).epsilon(1e-12));
}

TEST_CASE("residual_scores are query dot residual") {
  Rng rng(19);
  const Matrix emb = random_matrix(32, 6, 1.0, rng);
  const MultiIndex mi = build_index(emb, 3, QuantKind::product, 6, 20);

  // All-zero query annihilates every score.
  Vec zero(6, 0.0);
  for (double s : residual_scores(mi, zero)) CHECK(s == 0.0);

  // Basis-vector query extracts residual coordinate 0.
  Vec e1(6, 0.0);
  e1[0] = 1.0;
  const Vec s1 = residual_scores(mi, e1);
  for (std::size_t i = 0; i < emb.rows(); ++i)
    CHECK(s1[i] == doctest::Approx(mi.residuals(i, 0)).epsilon(1e-12));

  // General query matches an explicit loop.
  Vec z(6);
  for (auto& x : z) x = rng.normal();
  const Vec s = residual_scores(mi, z);
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 6; ++j) acc += z[j] * mi.residuals(i, j);
    CHECK(s[i] == doctest::Approx(acc).epsilon(1e-10));
  }
}

TEST_CASE("distortion decreases with codebook size and residual beats product") {
  // On iid Gaussian data, more codewords can only help, and quantizing the
  // full vector twice (residual form) is at least as expressive as
  // quantizing two disjoint halves with the same budget.  Averaged over
  // seeds to wash out kmeans local optima.
  Rng rng(23);
  const std::vector<std::size_t> ks{8, 16, 32, 64};
  std::vector<double> mean_pq(ks.size(), 0.0), mean_rq(ks.size(), 0.0);
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    const Matrix emb = random_matrix(512, 16, 1.0, rng);
    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      const MultiIndex pq =
          build_index(emb, ks[ki], QuantKind::product, 10, 100 + seed);
      const MultiIndex rq =
          build_index(emb, ks[ki], QuantKind::residual, 10, 200 + seed);
      mean_pq[ki] += distortion(pq) / seeds;
      mean_rq[ki] += distortion(rq) / seeds;
    }
  }
  for (std::size_t ki = 1; ki < ks.size(); ++ki) {
    CHECK(mean_pq[ki] <= mean_pq[ki - 1]);
    CHECK(mean_rq[ki] <= mean_rq[ki - 1]);
  }
  for (std::size_t ki = 0; ki < ks.size(); ++ki)
    CHECK(mean_rq[ki] <= mean_pq[ki]);
}

TEST_CASE("build_index validates arguments") {
  Rng rng(29);
  const Matrix emb = random_matrix(16, 6, 1.0, rng);
  CHECK_THROWS_AS((void)build_index(emb, 0, QuantKind::product, 5, 1),
                  value_error);
  const Matrix odd = random_matrix(16, 5, 1.0, rng);
  CHECK_THROWS_AS((void)build_index(odd, 4, QuantKind::product, 5, 1),
                  value_error);
  // Odd dimension is fine for the residual kind.
  CHECK_NOTHROW((void)build_index(odd, 4, QuantKind::residual, 5, 1));
  Matrix empty(0, 0);
  CHECK_THROWS_AS((void)build_index(empty, 2, QuantKind::product, 5, 1),
                  value_error);
}

TEST_CASE("index round-trips through its serialized form") {
  Rng rng(31);
  const Matrix emb = random_matrix(48, 8, 1.0, rng);
  for (QuantKind kind : {QuantKind::product, QuantKind::residual}) {
    const MultiIndex mi = build_index(emb, 4, kind, 8, 33);
    const std::string path = "roundtrip_index.bin";
    save_index(mi, path);
    const MultiIndex back = load_index(path, emb);
    std::filesystem::remove(path);

    CHECK(back.kind == mi.kind);
    CHECK(back.n() == mi.n());
    CHECK(back.dim() == mi.dim());
    CHECK(back.k() == mi.k());
    CHECK(back.assign1 == mi.assign1);
    CHECK(back.assign2 == mi.assign2);
    for (std::size_t i = 0; i < mi.book1.rows(); ++i)
      for (std::size_t j = 0; j < mi.book1.cols(); ++j)
        CHECK(back.book1(i, j) == mi.book1(i, j));
    for (std::size_t i = 0; i < mi.n(); ++i)
      for (std::size_t j = 0; j < mi.dim(); ++j)
        CHECK(back.residuals(i, j) ==
              doctest::Approx(mi.residuals(i, j)).epsilon(1e-12));
    CHECK(back.nonempty_cells() == mi.nonempty_cells());
  }
}

TEST_CASE("index loading rejects malformed files") {
  Rng rng(37);
  const Matrix emb = random_matrix(16, 4, 1.0, rng);
  const MultiIndex mi = build_index(emb, 2, QuantKind::product, 5, 38);
  const std::string path = "bad_index.bin";
  save_index(mi, path);
  {
    // Corrupt the magic.
    FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputc('X', f);
    std::fclose(f);
  }
  CHECK_THROWS_AS((void)load_index(path, emb), io_error);
  std::filesystem::remove(path);

  save_index(mi, path);
  const Matrix wrong = random_matrix(17, 4, 1.0, rng);
  CHECK_THROWS_AS((void)load_index(path, wrong), io_error);
  std::filesystem::remove(path);

  CHECK_THROWS_AS((void)load_index("no_such_file.bin", emb), io_error);
}

TEST_CASE("index_from_codebooks assigns rows to their nearest codewords") {
  // Hand-built one-dimensional residual setup with known assignments.
  Matrix emb(3, 2);
  emb(0, 0) = 0.1;
  emb(0, 1) = 0.0;
  emb(1, 0) = 0.9;
  emb(1, 1) = 1.0;
  emb(2, 0) = 1.1;
  emb(2, 1) = 1.0;
  Matrix b1(2, 2), b2(2, 2);
  b1(0, 0) = 0.0;
  b1(0, 1) = 0.0;
  b1(1, 0) = 1.0;
  b1(1, 1) = 1.0;
  // Second-stage book: zero vector and a small offset.
  b2(0, 0) = 0.0;
  b2(0, 1) = 0.0;
  b2(1, 0) = 0.1;
  b2(1, 1) = 0.0;
  const MultiIndex mi =
      index_from_codebooks(emb, QuantKind::residual, b1, b2);
  CHECK(mi.assign1[0] == 0);
  CHECK(mi.assign1[1] == 1);
  CHECK(mi.assign1[2] == 1);
  // Row 2's first-stage residual is (0.1, 0), matching codeword 1 exactly.
  CHECK(mi.assign2[2] == 1);
  CHECK(std::fabs(mi.residuals(2, 0)) < 1e-12);
}
