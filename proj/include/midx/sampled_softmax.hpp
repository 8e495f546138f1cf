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

#ifndef MIDX_SAMPLED_SOFTMAX_HPP
#define MIDX_SAMPLED_SOFTMAX_HPP

#include <cstdint>
#include <vector>

#include "midx/core.hpp"
#include "midx/samplers.hpp"

namespace midx {

// A positive class plus M sampled negatives with importance-corrected
// logits. Entry 0 is the positive and keeps its raw logit; an accidentally
// re-sampled positive also keeps its raw logit but is treated as a negative
// (only entry 0 carries the label).
struct CorrectedBatch {
  Vec corrected;                        // length m + 1
  std::vector<std::uint32_t> sources;   // catalog index per entry
  std::size_t m = 0;
};

// Cross-entropy against the full catalog: log sum exp(o) - o_positive.
double full_loss(std::span<const double> o, std::size_t positive);

// Gradient of full_loss with respect to the logits: softmax(o) - e_positive.
Vec full_grad_logits(std::span<const double> o, std::size_t positive);

// Corrected logits: o_s - ln(M q_s) for sampled negatives, raw logit for
// the positive and for accidental positive hits.
CorrectedBatch correct_logits(std::span<const double> o, std::size_t positive,
                              const SampleBatch& batch);

// log sum exp(o') - o'_0 over the corrected batch.
double sampled_loss(const CorrectedBatch& cb);

// Scatters softmax(o') - e_0 onto a length-n vector at the source indices,
// accumulating duplicates. The sampled estimate of full_grad_logits.
Vec sampled_grad_scatter(const CorrectedBatch& cb, std::size_t n);

}  // namespace midx

#endif  // MIDX_SAMPLED_SOFTMAX_HPP
