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

#ifndef MIDX_CODEBOOK_LEARNING_HPP
#define MIDX_CODEBOOK_LEARNING_HPP

#include <array>
#include <vector>

#include "midx/core.hpp"
#include "midx/multi_index.hpp"
#include "midx/rng.hpp"

namespace midx {

// Learnable codeword matrices refined by gradient descent. The product
// shape scores each half of a class embedding against its own book; the
// residual shape scores the full embedding against both full-width books
// and encodes by summing the two convex combinations.
struct SoftCodebooks {
  QuantKind kind = QuantKind::product;
  Matrix book1, book2;
};

// Warm start from the hard-quantization codebooks of a built index.
SoftCodebooks soft_codebooks_from(const MultiIndex& index);

struct SoftAssign {
  Matrix w1, w2;  // N x K soft weights, each row sums to 1
};

// Per-class, per-book softmax over codeword inner products.
SoftAssign soft_assign(const Matrix& emb, const SoftCodebooks& books);

// Encoded embedding per class: concatenation (product) or sum (residual)
// of the per-book convex combinations. Weights are a parameter so that
// hand-crafted (e.g. one-hot) assignments can be pushed through.
Matrix encode(const Matrix& emb, const SoftCodebooks& books,
              const SoftAssign& weights);

// Sum of squared reconstruction errors over classes.
double recon_loss(const Matrix& emb, const Matrix& encoded);

// log sum_i p_i^2 / p'_i where p uses true embeddings and p' encoded ones;
// zero iff the encoded softmax matches, and >= 0 always.
double kl_loss(std::span<const double> z, const Matrix& emb,
               const Matrix& encoded);

// Mean of kl_loss over a query set.
double kl_loss_mean(const Matrix& queries, const Matrix& emb,
                    const Matrix& encoded);

struct CodebookGrads {
  Matrix g1, g2;
};

// Analytic gradient of lambda * recon_loss + mean kl_loss with respect to
// every codeword entry, differentiated through the soft weights, the
// encoded embeddings, and the encoded softmax.
CodebookGrads codebook_grad(const Matrix& queries, const Matrix& emb,
                            const SoftCodebooks& books, double lambda);

struct StepTrace {
  std::vector<std::array<double, 2>> steps;  // (recon, kl) on each mini-set
  double initial_combined = 0.0;             // full query set, before step 1
  double final_combined = 0.0;               // full query set, after last step
  bool diverged = false;
};

// Plain gradient descent. Each step evaluates the KL term on a sampled
// mini-set of queries (all of them when the set is small). A non-finite
// loss aborts and returns the trajectory collected so far.
StepTrace codebook_step(SoftCodebooks& books, const Matrix& queries,
                        const Matrix& emb, double lambda, double lr,
                        std::size_t steps, Rng& rng,
                        std::size_t miniset = 32);

}  // namespace midx

#endif  // MIDX_CODEBOOK_LEARNING_HPP
