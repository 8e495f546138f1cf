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

#ifndef MIDX_SAMPLERS_HPP
#define MIDX_SAMPLERS_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "midx/alias.hpp"
#include "midx/core.hpp"
#include "midx/multi_index.hpp"
#include "midx/rng.hpp"

namespace midx {

enum class SamplerKind {
  uniform,     // 1/N
  unigram,     // class frequency
  midx_exact,  // three-stage draw equal to the full softmax
  midx_fast,   // residual term dropped, uniform within a cell
};

const char* sampler_kind_name(SamplerKind kind);
std::optional<SamplerKind> sampler_kind_from_name(const std::string& name);

// A sampler over a fixed catalog. The index pointer is non-owning and must
// outlive the spec for the midx kinds.
struct SamplerSpec {
  SamplerKind kind = SamplerKind::uniform;
  std::size_t n = 0;
  const MultiIndex* index = nullptr;
  std::shared_ptr<const Vec> unigram_probs;          // normalized frequencies
  std::shared_ptr<const AliasTable> unigram_table;
};

SamplerSpec make_static(SamplerKind kind, std::size_t n,
                        const Vec* frequencies = nullptr);
SamplerSpec make_midx(SamplerKind kind, const MultiIndex& index);

struct SampleBatch {
  std::vector<std::uint32_t> indices;  // M class draws, with replacement
  Vec probs;                           // proposal probability of each draw
  std::size_t m = 0;
};

// Query-specific sampling state. For the midx kinds this holds the two
// stage distributions and per-cell stage-3 state; stage weights are
// exponentiated against per-stage maxima, which cancel in the product, so
// the factorization is preserved exactly.
class PreparedQuery {
 public:
  SamplerKind kind() const { return kind_; }
  std::size_t n() const { return n_; }

  double proposal_prob(std::size_t i) const;

  // The literal stage factors; their product equals proposal_prob.
  double stage1_prob(std::size_t k1) const;
  double stage2_prob(std::size_t k1, std::size_t k2) const;
  double stage3_prob(std::size_t i) const;

  double psi_log(std::size_t k1) const { return psi_log_[k1]; }
  double omega_log(std::size_t cell) const { return omega_log_[cell]; }
  double shift() const { return t3_; }
  const AliasTable* stage1_table() const { return p1_ ? &*p1_ : nullptr; }
  const AliasTable* stage2_table(std::size_t k1) const {
    return p2_[k1].get();
  }

 private:
  friend PreparedQuery prepare(const SamplerSpec& spec,
                               std::span<const double> z);
  friend SampleBatch draw(const PreparedQuery& pq, std::size_t m, Rng& rng);

  SamplerKind kind_ = SamplerKind::uniform;
  std::size_t n_ = 0;
  const MultiIndex* index_ = nullptr;
  std::shared_ptr<const Vec> unigram_probs_;
  std::shared_ptr<const AliasTable> unigram_table_;

  Vec s1_, s2_;        // codeword scores per stage
  double t1_ = 0.0, t2_ = 0.0, t3_ = 0.0;
  Vec otilde_;         // residual scores (exact kind only)
  Vec w1_;             // stabilized stage-1 weights
  double w1_sum_ = 0.0;
  Vec psi_hat_;        // stabilized psi per k1
  Vec omega_hat_;      // stabilized omega per cell
  Vec psi_log_, omega_log_;
  double log_z1_ = 0.0;  // log of the true partition over stage 1
  std::optional<AliasTable> p1_;
  std::vector<std::unique_ptr<AliasTable>> p2_;      // per k1
  std::vector<std::unique_ptr<AliasTable>> stage3_;  // per cell, exact kind
};

PreparedQuery prepare(const SamplerSpec& spec, std::span<const double> z);

// proposal_prob as a free operation, mirroring the member.
double proposal_prob(const PreparedQuery& pq, std::size_t i);

// m i.i.d. draws with replacement; probs[j] is bit-identical to
// proposal_prob(pq, indices[j]).
SampleBatch draw(const PreparedQuery& pq, std::size_t m, Rng& rng);

}  // namespace midx

#endif  // MIDX_SAMPLERS_HPP
