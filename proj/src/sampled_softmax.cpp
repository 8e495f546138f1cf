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

#include "midx/sampled_softmax.hpp"

#include <cmath>

namespace midx {

double full_loss(std::span<const double> o, std::size_t positive) {
  if (positive >= o.size())
    throw value_error("full_loss: positive index out of range");
  return log_sum_exp(o) - o[positive];
}

Vec full_grad_logits(std::span<const double> o, std::size_t positive) {
  if (positive >= o.size())
    throw value_error("full_grad_logits: positive index out of range");
  Vec g = softmax(o);
  g[positive] -= 1.0;
  return g;
}

CorrectedBatch correct_logits(std::span<const double> o, std::size_t positive,
                              const SampleBatch& batch) {
  if (positive >= o.size())
    throw value_error("correct_logits: positive index out of range");
  if (batch.indices.size() != batch.m || batch.probs.size() != batch.m)
    throw dimension_error("correct_logits: inconsistent batch");
  CorrectedBatch cb;
  cb.m = batch.m;
  cb.corrected.resize(batch.m + 1);
  cb.sources.resize(batch.m + 1);
  cb.corrected[0] = o[positive];
  cb.sources[0] = static_cast<std::uint32_t>(positive);
  const double log_m = std::log(static_cast<double>(batch.m));
  for (std::size_t j = 0; j < batch.m; ++j) {
    const std::uint32_t s = batch.indices[j];
    if (s >= o.size())
      throw dimension_error("correct_logits: sampled index out of range");
    const double q = batch.probs[j];
    if (!std::isfinite(q) || q <= 0.0 || q > 1.0)
      throw value_error("correct_logits: proposal probability not in (0, 1]");
    cb.sources[j + 1] = s;
    cb.corrected[j + 1] =
        s == positive ? o[s] : o[s] - (log_m + std::log(q));
  }
  return cb;
}

double sampled_loss(const CorrectedBatch& cb) {
  return log_sum_exp(cb.corrected) - cb.corrected[0];
}

Vec sampled_grad_scatter(const CorrectedBatch& cb, std::size_t n) {
  Vec p = softmax(cb.corrected);
  Vec g(n, 0.0);
  for (std::size_t j = 0; j < cb.sources.size(); ++j) {
    if (cb.sources[j] >= n)
      throw dimension_error("sampled_grad_scatter: source out of range");
    g[cb.sources[j]] += p[j];
  }
  g[cb.sources[0]] -= 1.0;
  return g;
}

}  // namespace midx
