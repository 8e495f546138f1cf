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

#ifndef MIDX_MULTI_INDEX_HPP
#define MIDX_MULTI_INDEX_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "midx/core.hpp"
#include "midx/rng.hpp"

namespace midx {

enum class QuantKind : std::uint8_t {
  product = 0,   // split dimensions, one codebook per half
  residual = 1,  // full-width codebooks, second trained on residuals
};

// Two-level inverted multi-index over a class catalog. Every class lands in
// exactly one (k1, k2) cell; the reconstruction identity holds per entry:
//   product:  q_i = [c1_{k1(i)} ++ c2_{k2(i)}] + residual_i
//   residual: q_i =  c1_{k1(i)} + c2_{k2(i)}   + residual_i
class MultiIndex {
 public:
  QuantKind kind = QuantKind::product;
  Matrix book1, book2;                       // K x cw_dim codewords
  std::vector<std::uint32_t> assign1, assign2;
  Matrix residuals;                          // N x D
  std::vector<std::vector<std::uint32_t>> cells;  // K*K lists, row-major
  bool k_reduced = false;

  std::size_t n() const { return assign1.size(); }
  std::size_t dim() const { return residuals.cols(); }
  std::size_t k() const { return book1.rows(); }

  const std::vector<std::uint32_t>& cell(std::size_t k1, std::size_t k2) const {
    return cells[k1 * k() + k2];
  }
  std::size_t cell_of(std::size_t i) const {
    return assign1[i] * k() + assign2[i];
  }
  std::size_t nonempty_cells() const;
};

// Quantize a catalog: per-half k-means for the product kind, two-level
// k-means (catalog, then first-level residuals) for the residual kind.
MultiIndex build_index(const Matrix& emb, std::size_t k, QuantKind kind,
                       std::size_t iters, std::uint64_t seed);

// Index from externally supplied codebooks (e.g. refined ones): classes are
// hard-assigned to the nearest codeword(s), residuals and cells recomputed.
MultiIndex index_from_codebooks(const Matrix& emb, QuantKind kind,
                                const Matrix& book1, const Matrix& book2);

// Sum of squared residual norms.
double distortion(const MultiIndex& index);

// Residual scores: per-class inner product of the query with the residual.
Vec residual_scores(const MultiIndex& index, std::span<const double> z);

// Binary index file: magic, kind, sizes, both codebooks as 64-bit floats,
// both assignment vectors as u32. Residuals and cells are derived state and
// are recomputed on load from the embedding matrix.
void save_index(const MultiIndex& index, const std::string& path);
MultiIndex load_index(const std::string& path, const Matrix& emb);

}  // namespace midx

#endif  // MIDX_MULTI_INDEX_HPP
