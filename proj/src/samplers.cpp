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

#include "midx/samplers.hpp"

#include <algorithm>
#include <cmath>

namespace midx {

const char* sampler_kind_name(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::uniform: return "uniform";
    case SamplerKind::unigram: return "unigram";
    case SamplerKind::midx_exact: return "midx_exact";
    case SamplerKind::midx_fast: return "midx_fast";
  }
  return "?";
}

std::optional<SamplerKind> sampler_kind_from_name(const std::string& name) {
  if (name == "uniform") return SamplerKind::uniform;
  if (name == "unigram") return SamplerKind::unigram;
  if (name == "midx_exact") return SamplerKind::midx_exact;
  if (name == "midx_fast") return SamplerKind::midx_fast;
  return std::nullopt;
}

SamplerSpec make_static(SamplerKind kind, std::size_t n,
                        const Vec* frequencies) {
  if (n == 0) throw value_error("sampler: empty catalog");
  SamplerSpec spec;
  spec.kind = kind;
  spec.n = n;
  if (kind == SamplerKind::uniform) return spec;
  if (kind != SamplerKind::unigram)
    throw value_error("make_static: kind must be uniform or unigram");
  if (frequencies == nullptr || frequencies->size() != n)
    throw value_error("unigram: frequencies must have one entry per class");
  double total = 0.0;
  for (double f : *frequencies) {
    if (!std::isfinite(f) || f < 0.0)
      throw value_error("unigram: frequencies must be finite, nonnegative");
    total += f;
  }
  if (total <= 0.0) throw value_error("unigram: frequency sum must be > 0");
  auto probs = std::make_shared<Vec>(*frequencies);
  for (double& p : *probs) p /= total;
  spec.unigram_probs = probs;
  spec.unigram_table = std::make_shared<AliasTable>(*frequencies);
  return spec;
}

SamplerSpec make_midx(SamplerKind kind, const MultiIndex& index) {
  if (kind != SamplerKind::midx_exact && kind != SamplerKind::midx_fast)
    throw value_error("make_midx: kind must be midx_exact or midx_fast");
  SamplerSpec spec;
  spec.kind = kind;
  spec.n = index.n();
  spec.index = &index;
  return spec;
}

PreparedQuery prepare(const SamplerSpec& spec, std::span<const double> z) {
  PreparedQuery pq;
  pq.kind_ = spec.kind;
  pq.n_ = spec.n;
  if (spec.kind == SamplerKind::uniform) return pq;
  if (spec.kind == SamplerKind::unigram) {
    pq.unigram_probs_ = spec.unigram_probs;
    pq.unigram_table_ = spec.unigram_table;
    return pq;
  }

  const MultiIndex* index = spec.index;
  if (index == nullptr) throw value_error("prepare: midx kind needs an index");
  if (index->n() != spec.n)
    throw dimension_error("prepare: index/catalog size mismatch");
  if (z.size() != index->dim())
    throw dimension_error("prepare: query dimension mismatch");
  pq.index_ = index;

  const std::size_t k = index->k();
  const std::size_t h = index->dim() / 2;
  const bool product = index->kind == QuantKind::product;
  const auto z1 = product ? z.subspan(0, h) : z;
  const auto z2 = product ? z.subspan(h, h) : z;

  pq.s1_.resize(k);
  pq.s2_.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    pq.s1_[j] = dot(z1, index->book1.row(j));
    pq.s2_[j] = dot(z2, index->book2.row(j));
  }
  pq.t1_ = *std::max_element(pq.s1_.begin(), pq.s1_.end());
  pq.t2_ = *std::max_element(pq.s2_.begin(), pq.s2_.end());

  // Per-cell mass: sum of exp residual scores for the exact kind, plain
  // occupancy for the fast kind (whose stage 3 is uniform in the cell).
  pq.omega_hat_.assign(k * k, 0.0);
  if (spec.kind == SamplerKind::midx_exact) {
    pq.otilde_ = residual_scores(*index, z);
    pq.t3_ = *std::max_element(pq.otilde_.begin(), pq.otilde_.end());
    for (std::size_t i = 0; i < index->n(); ++i)
      pq.omega_hat_[index->cell_of(i)] += std::exp(pq.otilde_[i] - pq.t3_);
  } else {
    pq.t3_ = 0.0;
    for (std::size_t c = 0; c < k * k; ++c)
      pq.omega_hat_[c] = static_cast<double>(index->cells[c].size());
  }

  pq.psi_hat_.assign(k, 0.0);
  for (std::size_t k1 = 0; k1 < k; ++k1)
    for (std::size_t k2 = 0; k2 < k; ++k2)
      pq.psi_hat_[k1] +=
          pq.omega_hat_[k1 * k + k2] * std::exp(pq.s2_[k2] - pq.t2_);

  pq.w1_.resize(k);
  pq.w1_sum_ = 0.0;
  for (std::size_t k1 = 0; k1 < k; ++k1) {
    pq.w1_[k1] = pq.psi_hat_[k1] * std::exp(pq.s1_[k1] - pq.t1_);
    pq.w1_sum_ += pq.w1_[k1];
  }
  pq.log_z1_ = std::log(pq.w1_sum_) + pq.t1_ + pq.t2_ + pq.t3_;

  pq.psi_log_.resize(k);
  for (std::size_t k1 = 0; k1 < k; ++k1)
    pq.psi_log_[k1] = std::log(pq.psi_hat_[k1]) + pq.t2_ + pq.t3_;
  pq.omega_log_.resize(k * k);
  for (std::size_t c = 0; c < k * k; ++c)
    pq.omega_log_[c] = std::log(pq.omega_hat_[c]) + pq.t3_;

  pq.p1_.emplace(pq.w1_);
  pq.p2_.resize(k);
  Vec row(k);
  for (std::size_t k1 = 0; k1 < k; ++k1) {
    if (pq.psi_hat_[k1] <= 0.0) continue;  // no class under this codeword
    for (std::size_t k2 = 0; k2 < k; ++k2)
      row[k2] = pq.omega_hat_[k1 * k + k2] * std::exp(pq.s2_[k2] - pq.t2_);
    pq.p2_[k1] = std::make_unique<AliasTable>(row);
  }

  if (spec.kind == SamplerKind::midx_exact) {
    pq.stage3_.resize(k * k);
    Vec cw;
    for (std::size_t c = 0; c < k * k; ++c) {
      const auto& cell = index->cells[c];
      if (cell.empty()) continue;
      cw.resize(cell.size());
      for (std::size_t t = 0; t < cell.size(); ++t)
        cw[t] = std::exp(pq.otilde_[cell[t]] - pq.t3_);
      pq.stage3_[c] = std::make_unique<AliasTable>(cw);
    }
  }
  return pq;
}

double PreparedQuery::proposal_prob(std::size_t i) const {
  if (i >= n_) throw value_error("proposal_prob: class index out of range");
  switch (kind_) {
    case SamplerKind::uniform:
      return 1.0 / static_cast<double>(n_);
    case SamplerKind::unigram:
      return (*unigram_probs_)[i];
    case SamplerKind::midx_fast:
      return std::exp(s1_[index_->assign1[i]] + s2_[index_->assign2[i]] -
                      log_z1_);
    case SamplerKind::midx_exact:
      return std::exp(s1_[index_->assign1[i]] + s2_[index_->assign2[i]] +
                      otilde_[i] - log_z1_);
  }
  return 0.0;
}

double PreparedQuery::stage1_prob(std::size_t k1) const {
  return w1_[k1] / w1_sum_;
}

double PreparedQuery::stage2_prob(std::size_t k1, std::size_t k2) const {
  if (psi_hat_[k1] <= 0.0) return 0.0;
  return omega_hat_[k1 * index_->k() + k2] * std::exp(s2_[k2] - t2_) /
         psi_hat_[k1];
}

double PreparedQuery::stage3_prob(std::size_t i) const {
  const std::size_t c = index_->cell_of(i);
  if (kind_ == SamplerKind::midx_fast)
    return 1.0 / static_cast<double>(index_->cells[c].size());
  return std::exp(otilde_[i] - t3_) / omega_hat_[c];
}

double proposal_prob(const PreparedQuery& pq, std::size_t i) {
  return pq.proposal_prob(i);
}

SampleBatch draw(const PreparedQuery& pq, std::size_t m, Rng& rng) {
  if (m == 0) throw value_error("draw: m must be >= 1");
  SampleBatch batch;
  batch.m = m;
  batch.indices.resize(m);
  batch.probs.resize(m);
  for (std::size_t t = 0; t < m; ++t) {
    std::size_t idx = 0;
    switch (pq.kind_) {
      case SamplerKind::uniform:
        idx = rng.uniform_below(pq.n_);
        break;
      case SamplerKind::unigram:
        idx = pq.unigram_table_->draw(rng);
        break;
      case SamplerKind::midx_exact:
      case SamplerKind::midx_fast: {
        const std::size_t k1 = pq.p1_->draw(rng);
        const std::size_t k2 = pq.p2_[k1]->draw(rng);
        const auto& cell = pq.index_->cells[k1 * pq.index_->k() + k2];
        if (pq.kind_ == SamplerKind::midx_fast)
          idx = cell[rng.uniform_below(cell.size())];
        else
          idx = cell[pq.stage3_[k1 * pq.index_->k() + k2]->draw(rng)];
        break;
      }
    }
    batch.indices[t] = static_cast<std::uint32_t>(idx);
    batch.probs[t] = pq.proposal_prob(idx);
  }
  return batch;
}

}  // namespace midx
